import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xcorpus.errors import DimensionMismatch, EmptyGrid, MinorityTooSmall, ModelMissing, SingleClass
from xcorpus.ml import (
    KINDS,
    ClassifierKind,
    GridSpec,
    ensemble_predict,
    grid_search,
    load_model,
    model_to_dict,
    participant_folds,
    predict,
    predict_proba,
    save_model,
    smote,
    train,
)
from xcorpus.ml.models import ForestModel
from xcorpus.ml.trees import Tree

FAST = {
    ClassifierKind.SVM_RBF: {},
    ClassifierKind.RANDOM_FOREST: {"n_estimators": 30},
    ClassifierKind.GBDT_LEAFWISE: {"n_estimators": 30},
    ClassifierKind.GBDT_DEPTHWISE: {"n_estimators": 30},
}


def separable(seed=0, n=10, d=4):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-2, 0.3, (n, d)), rng.normal(2, 0.3, (n, d))])
    return X, np.repeat([0, 1], n)


@pytest.mark.parametrize("kind", KINDS)
def test_separable_clusters(kind):
    X, y = separable()
    model = train(kind, X, y, FAST[kind], seed=1)
    assert np.all(predict(model, X) == y)
    assert predict_proba(model, np.full(4, 2.0))[0] > 0.9
    p = predict_proba(model, np.random.default_rng(5).normal(0, 5, (50, 4)))
    assert np.all((p >= 0) & (p <= 1))


@pytest.mark.parametrize("kind", KINDS)
def test_null_labels_near_chance(kind):
    rng = np.random.default_rng(11)
    X = rng.normal(size=(200, 6))
    y = rng.integers(0, 2, 200)
    folds = np.arange(200) % 5
    correct = 0
    for f in range(5):
        m = train(kind, X[folds != f], y[folds != f], FAST[kind], seed=f)
        correct += np.sum(predict(m, X[folds == f]) == y[folds == f])
    assert 0.35 <= correct / 200 <= 0.65


@pytest.mark.parametrize("kind", KINDS)
def test_deterministic_and_round_trip(kind, tmp_path):
    X, y = separable(3, n=15)
    a = train(kind, X, y, FAST[kind], seed=9)
    b = train(kind, X, y, FAST[kind], seed=9)
    assert model_to_dict(a) == model_to_dict(b)
    save_model(a, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    Xq = np.random.default_rng(0).normal(0, 3, (40, 4))
    assert np.array_equal(predict_proba(a, Xq), predict_proba(back, Xq))


def test_train_errors():
    X, y = separable()
    with pytest.raises(SingleClass):
        train("SVM_RBF", X, np.zeros(20, dtype=int))
    with pytest.raises(DimensionMismatch):
        train("SVM_RBF", X, y[:-1])
    m = train("SVM_RBF", X, y)
    with pytest.raises(DimensionMismatch):
        predict_proba(m, np.zeros((2, 3)))


def test_svm_decision_matches_libsvm():
    from sklearn.svm import SVC

    X, y = separable(2, n=20)
    X = X + np.random.default_rng(1).normal(0, 1.5, X.shape)
    m = train("SVM_RBF", X, y, {"C": 1.0, "gamma": 0.1})
    ref = SVC(C=1.0, gamma=0.1, tol=1e-6).fit(X, y)
    np.testing.assert_allclose(m.decision_function(X), ref.decision_function(X), atol=1e-9)


def leaf(v):
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([float(v)]))


def test_forest_vote_fraction():
    forest = ForestModel([leaf(1.0)] * 3 + [leaf(0.0)] * 7, n_features=2, seed=0)
    assert predict_proba(forest, np.zeros(2))[0] == pytest.approx(0.3)


class Fixed:
    kind = ClassifierKind.SVM_RBF
    n_features = 1

    def __init__(self, p):
        self.p = p

    def predict_proba(self, X):
        return np.full(len(X), self.p)


def test_ensemble_examples():
    x = np.zeros((1, 1))
    members = [Fixed(p) for p in (0.2, 0.4, 0.6, 0.8)]
    assert ensemble_predict(members, x)[0] == pytest.approx(0.5)
    assert ensemble_predict([Fixed(0.37)] * 4, x)[0] == pytest.approx(0.37)
    votes = [Fixed(p) for p in (0.9, 0.7, 0.1, 0.2)]
    assert ensemble_predict(votes, x, mode="vote")[0] == 0.5  # 2-2 split decides positive
    with pytest.raises(ModelMissing):
        ensemble_predict({ClassifierKind.SVM_RBF: members[0]}, x)


@given(st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_ensemble_within_member_range(ps):
    p = ensemble_predict([Fixed(v) for v in ps], np.zeros((1, 1)))[0]
    assert min(ps) - 1e-12 <= p <= max(ps) + 1e-12


def test_smote_examples():
    X = np.array([[5.0, 5.0], [6.0, 5.0], [0.0, 0.0], [1.0, 1.0], [5.5, 4.0]])
    y = np.array([0, 0, 1, 1, 0])
    Xo, yo = smote(X, y, seed=0)
    assert np.array_equal(Xo[:5], X) and len(yo) == 6
    new = Xo[5]
    assert new[0] == pytest.approx(new[1]) and 0 <= new[0] <= 1

    Xb = np.random.default_rng(0).normal(size=(20, 2))
    yb = np.repeat([0, 1], 10)
    Xo, yo = smote(Xb, yb)
    assert Xo is Xb or np.array_equal(Xo, Xb)

    X40 = np.random.default_rng(1).normal(size=(40, 3))
    y40 = np.r_[np.ones(10, int), np.zeros(30, int)]
    _, yo = smote(X40, y40)
    assert (np.sum(yo == 1), np.sum(yo == 0)) == (30, 30)

    with pytest.raises(MinorityTooSmall):
        smote(X40, np.r_[1, np.zeros(39, int)])


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_smote_points_are_convex_combinations(seed, n_min):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30 + n_min, 3))
    y = np.r_[np.ones(n_min, int), np.zeros(30, int)]
    Xo, yo = smote(X, y, seed=seed)
    M = X[:n_min]
    for p in Xo[len(X):]:
        ok = False
        for i in range(n_min):
            for j in range(n_min):
                d = M[j] - M[i]
                u = np.dot(p - M[i], d) / max(np.dot(d, d), 1e-300)
                if -1e-9 <= u <= 1 + 1e-9 and np.allclose(M[i] + u * d, p, atol=1e-9):
                    ok = True
        assert ok


def test_participant_folds_sizes():
    groups = np.repeat([f"g{i}" for i in range(7)], 3)
    folds = participant_folds(groups, 3, seed=0)
    sizes = sorted(len(f) for f in folds)
    assert sizes == [2, 2, 3]
    assert sorted(np.concatenate(folds).tolist()) == sorted(set(groups.tolist()))


def test_grid_search_single_cell():
    X, y = separable()
    grid = GridSpec({"SVM_RBF": {"C": [3.0], "gamma": [0.2]}})
    best, _ = grid_search("SVM_RBF", X, y, np.arange(20) % 5, grid)
    assert best == {"C": 3.0, "gamma": 0.2}


def test_grid_search_prefers_better_cell():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    y = (X[:, 0] > 0).astype(int)
    groups = np.arange(60) % 6
    grid = GridSpec({"GBDT_DEPTHWISE": {"n_estimators": [20], "max_depth": [2], "learning_rate": [0.0, 0.3]}})
    best, scores = grid_search("GBDT_DEPTHWISE", X, y, groups, grid)
    assert best["learning_rate"] == 0.3
    assert scores[1] > scores[0]


def test_grid_search_takes_training_data_only():
    X, y = separable()
    grid = GridSpec({"SVM_RBF": {"C": [1.0], "gamma": [0.1]}})
    with pytest.raises(TypeError):
        grid_search("SVM_RBF", X, y, np.arange(20) % 5, grid, X_test=X)


def test_empty_grid():
    with pytest.raises(EmptyGrid):
        GridSpec({"SVM_RBF": {"C": []}})
    with pytest.raises(EmptyGrid):
        GridSpec({}).cells("SVM_RBF")
