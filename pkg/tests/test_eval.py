import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xcorpus.errors import (
    Empty,
    HeldOutNotFound,
    LengthMismatch,
    ProtocolError,
    SameCorpus,
    SingleClass,
    SingleClassTestForAuc,
    TooFewParticipants,
)
from xcorpus.eval import (
    ROW_ORDER,
    EvalConfig,
    Protocol,
    ProtocolKind,
    cross_corpus,
    loco,
    parse_report_csv,
    protocol_splits,
    random_baseline,
    render_report,
    within_corpus,
)
from xcorpus.features import SampleTable
from xcorpus.metrics import accuracy, roc_auc

from conftest import TINY_GRID, make_table

CFG = EvalConfig(grid=TINY_GRID)


def test_metric_examples():
    assert roc_auc([0.9, 0.8, 0.4, 0.3], [1, 1, 0, 0]) == 1.0
    assert accuracy([1, 1, 0, 0], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.3, 0.9], [1, 0]) == 0.0
    assert roc_auc([0.5] * 4, [1, 0, 1, 0]) == 0.5
    with pytest.raises(LengthMismatch):
        accuracy([1, 0], [1])
    with pytest.raises(SingleClass):
        roc_auc([0.2, 0.4], [1, 1])


def test_auc_matches_sklearn():
    from sklearn.metrics import roc_auc_score

    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 300)
    p = np.round(rng.random(300), 1)  # plenty of ties
    assert roc_auc(p, y) == pytest.approx(roc_auc_score(y, p), abs=1e-12)


@given(st.lists(st.integers(-50, 50), min_size=4, max_size=30), st.integers(0, 1000))
def test_auc_invariant_under_monotone_map(scores, seed):
    y = np.random.default_rng(seed).integers(0, 2, len(scores))
    y[0], y[1] = 0, 1
    s = np.asarray(scores, dtype=float)
    a = roc_auc(s, y)
    assert 0.0 <= a <= 1.0
    assert roc_auc(np.tanh(s / 100) * 3 + 1, y) == pytest.approx(a, abs=1e-12)


def test_random_baseline():
    y = np.tile([0, 1], 5000)
    acc, auc = random_baseline(y, seed=4)
    assert abs(acc - 0.5) <= 0.02
    assert abs(auc - 0.5) <= 0.03
    assert random_baseline(y, 4) == (acc, auc)
    acc1, _ = random_baseline([1], 0)
    assert acc1 in (0.0, 1.0)
    with pytest.raises(Empty):
        random_baseline([], 0)


def test_within_folds_are_disjoint_and_even():
    table = make_table(n_participants=12)
    splits = protocol_splits(Protocol("within", ("A",), "A"), table, seed=1)
    assert len(splits) == 5
    sizes = sorted(len(set(te.participant_id.tolist())) for _, te in splits)
    assert sizes == [2, 2, 2, 3, 3]
    for tr, te in splits:
        assert not set(tr.participant_id.tolist()) & set(te.participant_id.tolist())
        assert len(tr) + len(te) == len(table)
    splits10 = protocol_splits(Protocol("within", ("A",), "A"), make_table(10), seed=1)
    assert all(len(set(te.participant_id.tolist())) == 2 for _, te in splits10)


def test_too_few_participants():
    with pytest.raises(TooFewParticipants):
        within_corpus(make_table(n_participants=4), 0, CFG)


def test_within_strong_effect():
    rep = within_corpus(make_table(10, signal=5.0), seed=0, config=CFG)
    assert rep.rows["Ensemble"][0] >= 0.85
    assert list(rep.rows) == list(ROW_ORDER)
    for acc, auc in rep.rows.values():
        assert 0 <= acc <= 1 and 0 <= auc <= 1


def test_within_shuffled_labels_near_chance():
    rep = within_corpus(make_table(20, per=20, signal=5.0, shuffle=True, seed=2), seed=0, config=CFG)
    assert 0.4 <= rep.rows["Ensemble"][0] <= 0.6


def test_within_deterministic():
    t = make_table(10, signal=1.0)
    assert within_corpus(t, 5, CFG).rows == within_corpus(t, 5, CFG).rows


def test_cross_shared_driver_both_directions():
    a = make_table(10, seed=0, corpus="A", signal=2.5)
    b = make_table(10, seed=1, corpus="B", signal=2.5)
    assert cross_corpus(a, b, 0, CFG).rows["Ensemble"][1] > 0.6
    assert cross_corpus(b, a, 0, CFG).rows["Ensemble"][1] > 0.6


def test_cross_independent_labels():
    a = make_table(10, seed=0, corpus="A", signal=2.5)
    b = make_table(30, per=20, seed=1, corpus="B", signal=2.5, shuffle=True)
    assert 0.4 <= cross_corpus(a, b, 0, CFG).rows["Ensemble"][1] <= 0.6


def test_cross_errors():
    a = make_table(6, corpus="A")
    with pytest.raises(SameCorpus):
        cross_corpus(a, make_table(6, corpus="A", seed=3), 0, CFG)
    b = make_table(6, corpus="B")
    single = b.with_labels(np.ones(len(b), dtype=int))
    with pytest.raises(SingleClassTestForAuc):
        cross_corpus(a, single, 0, CFG)
    with pytest.raises(SameCorpus):
        Protocol("cross", ("A",), "A")


def test_loco_counts_and_errors():
    tables = [make_table(6, seed=i, corpus=c) for i, c in enumerate("ABC")]
    tables[2] = make_table(7, seed=2, corpus="C")
    rep = loco(tables, "C", 0, CFG)
    assert rep.n_train == len(tables[0]) + len(tables[1])
    assert rep.n_test == len(tables[2])
    assert rep.column == "Test: C"
    with pytest.raises(HeldOutNotFound):
        loco(tables, "D", 0, CFG)
    with pytest.raises(ProtocolError):
        loco(tables[:2], "A", 0, CFG)
    with pytest.raises(ProtocolError):
        Protocol(ProtocolKind.LOCO, ("A", "C"), "C")


@pytest.fixture(scope="module")
def two_reports():
    a = make_table(6, seed=0, corpus="A")
    b = make_table(6, seed=1, corpus="B")
    return [cross_corpus(a, b, 0, CFG), cross_corpus(b, a, 0, CFG)]


def test_render_single_and_pair(two_reports):
    one = render_report(two_reports[:1])
    body = [ln for ln in one.splitlines() if ln.split() and ln.split()[0] in ROW_ORDER]
    assert [ln.split()[0] for ln in body] == list(ROW_ORDER)
    two = render_report(two_reports)
    head = two.splitlines()[0]
    assert "A/B" in head and "B/A" in head


def test_render_csv_round_trip(two_reports):
    text = render_report(two_reports, fmt="csv")
    assert text.splitlines()[0] == "Model,A/B Acc,A/B AUC,B/A Acc,B/A AUC"
    parsed = parse_report_csv(text)
    for rep in two_reports:
        for name, (acc, auc) in rep.rows.items():
            assert parsed[rep.column][name] == pytest.approx((acc, auc), abs=5e-4)


def test_best_value_marked(two_reports):
    text = render_report(two_reports)
    assert text.count("*") >= 4
    random_line = next(ln for ln in text.splitlines() if ln.startswith("Random"))
    assert "*" not in random_line


def test_render_requires_reports():
    with pytest.raises(Empty):
        render_report([])


def test_perturbed_test_set_leaves_models_unchanged():
    from xcorpus.eval import fit_pipeline
    from xcorpus.ml import model_to_dict

    train = make_table(6, seed=0, corpus="A")
    a = fit_pipeline(train, 3, CFG)
    b = fit_pipeline(SampleTable.concat([train]), 3, CFG)
    for k in a.models:
        assert model_to_dict(a.models[k]) == model_to_dict(b.models[k])
