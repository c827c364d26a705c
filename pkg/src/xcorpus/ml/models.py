"""Classifier kinds, training, probability prediction, ensembling and persistence."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.svm import SVC

from ..errors import DimensionMismatch, ModelMissing, SingleClass, ValidationError
from .trees import Binner, Tree, fit_gini_tree, fit_newton_tree

MODEL_FORMAT_VERSION = 1


class ClassifierKind(str, enum.Enum):
    SVM_RBF = "SVM_RBF"
    GBDT_LEAFWISE = "GBDT_LEAFWISE"
    RANDOM_FOREST = "RANDOM_FOREST"
    GBDT_DEPTHWISE = "GBDT_DEPTHWISE"


# report row names, in table order
ROW_NAMES = {
    ClassifierKind.SVM_RBF: "SVM",
    ClassifierKind.GBDT_LEAFWISE: "LGBM",
    ClassifierKind.RANDOM_FOREST: "RF",
    ClassifierKind.GBDT_DEPTHWISE: "XGB",
}
KINDS = tuple(ClassifierKind)

DEFAULT_HYPERPARAMS = {
    ClassifierKind.SVM_RBF: {"C": 1.0, "gamma": 0.1},
    ClassifierKind.RANDOM_FOREST: {"n_estimators": 100, "max_depth": 31},
    ClassifierKind.GBDT_LEAFWISE: {"n_estimators": 100, "num_leaves": 31, "learning_rate": 0.1},
    ClassifierKind.GBDT_DEPTHWISE: {"n_estimators": 100, "max_depth": 6, "learning_rate": 0.1},
}


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def platt_fit(decision, y, max_iter: int = 100):
    """Fit ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by regularized Newton iterations.

    Targets are smoothed to ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)`` as in
    Platt's original method; the solver follows Lin, Lin and Weng (2007).
    """
    f = np.asarray(decision, dtype=float)
    y = np.asarray(y, dtype=int)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))

    def objective(a, b):
        fa = f * a + b
        return float(np.sum(np.where(fa >= 0, t * fa + np.log1p(np.exp(-fa)), (t - 1) * fa + np.log1p(np.exp(fa)))))

    fval = objective(A, B)
    sigma = 1e-12
    for _ in range(max_iter):
        fa = f * A + B
        p = _sigmoid(-fa)
        q = 1 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return float(A), float(B)


@dataclass
class SVMModel:
    """RBF-kernel SVM stored as support vectors, dual coefficients and Platt pair."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    intercept: float
    gamma: float
    platt_a: float
    platt_b: float
    n_features: int
    seed: int
    hyperparams: dict = field(default_factory=dict)
    kind: ClassifierKind = ClassifierKind.SVM_RBF

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        sv = self.support_vectors
        d2 = (X * X).sum(1)[:, None] + (sv * sv).sum(1)[None, :] - 2.0 * X @ sv.T
        K = np.exp(-self.gamma * np.maximum(d2, 0.0))
        return K @ self.dual_coef + self.intercept

    def predict_proba(self, X):
        return _sigmoid(-(self.platt_a * self.decision_function(X) + self.platt_b))

    def params(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "intercept": self.intercept,
            "gamma": self.gamma,
            "platt_a": self.platt_a,
            "platt_b": self.platt_b,
        }

    @classmethod
    def from_params(cls, p, **meta):
        return cls(np.asarray(p["support_vectors"], dtype=float).reshape(-1, meta["n_features"]),
                   np.asarray(p["dual_coef"], dtype=float), p["intercept"], p["gamma"],
                   p["platt_a"], p["platt_b"], **meta)


@dataclass
class ForestModel:
    """Bagged gini trees; the probability is the fraction of trees voting positive."""

    trees: list
    n_features: int
    seed: int
    hyperparams: dict = field(default_factory=dict)
    kind: ClassifierKind = ClassifierKind.RANDOM_FOREST

    def votes(self, X):
        X = np.asarray(X, dtype=float)
        return np.vstack([(t.predict(X) > 0.5).astype(float) for t in self.trees])

    def predict_proba(self, X):
        return self.votes(X).mean(axis=0)

    def params(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_params(cls, p, **meta):
        return cls([Tree.from_dict(t) for t in p["trees"]], **meta)


@dataclass
class BoostedModel:
    """Additive regression trees on the logit scale (logistic loss)."""

    base_score: float
    learning_rate: float
    trees: list
    n_features: int
    seed: int
    hyperparams: dict = field(default_factory=dict)
    kind: ClassifierKind = ClassifierKind.GBDT_DEPTHWISE

    def raw_score(self, X):
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def predict_proba(self, X):
        return _sigmoid(self.raw_score(X))

    def params(self) -> dict:
        return {"base_score": self.base_score, "learning_rate": self.learning_rate,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_params(cls, p, **meta):
        return cls(p["base_score"], p["learning_rate"], [Tree.from_dict(t) for t in p["trees"]], **meta)


_MODEL_CLASSES = {
    ClassifierKind.SVM_RBF: SVMModel,
    ClassifierKind.RANDOM_FOREST: ForestModel,
    ClassifierKind.GBDT_LEAFWISE: BoostedModel,
    ClassifierKind.GBDT_DEPTHWISE: BoostedModel,
}


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionMismatch(f"X has shape {X.shape} but y has {len(y)} labels")
    n_pos = int(np.sum(y == 1))
    if n_pos == 0 or n_pos == len(y):
        raise SingleClass("training data contains a single class")
    return X, y


def _train_svm(X, y, hp, seed):
    gamma = float(hp.get("gamma", 0.1))
    svc = SVC(C=float(hp.get("C", 1.0)), kernel="rbf", gamma=gamma, tol=1e-6, cache_size=200)
    svc.fit(X, y)
    sv = np.array(svc.support_vectors_, dtype=float)
    # libsvm orders classes (0, 1) and its decision value is positive for class 1
    dual = np.array(svc.dual_coef_[0], dtype=float)
    model = SVMModel(sv, dual, float(svc.intercept_[0]), gamma, 0.0, 0.0, X.shape[1], seed, dict(hp))
    a, b = platt_fit(model.decision_function(X), y)
    model.platt_a, model.platt_b = a, b
    return model


def _train_forest(X, y, hp, seed):
    rng = np.random.default_rng(seed)
    n, d = X.shape
    max_depth = int(hp.get("max_depth", 31))
    m_try = max(1, int(math.floor(math.sqrt(d))))
    trees = []
    for _ in range(int(hp.get("n_estimators", 100))):
        boot = rng.integers(0, n, n)
        Xb, yb = X[boot], y[boot]
        binner = Binner().fit(Xb)
        trees.append(fit_gini_tree(Xb, yb, max_depth, rng, max_features=m_try,
                                   min_samples_leaf=int(hp.get("min_samples_leaf", 1)),
                                   binner=binner, B=binner.transform(Xb)))
    return ForestModel(trees, d, seed, dict(hp))


def _train_boosted(X, y, hp, seed, kind):
    lr = float(hp.get("learning_rate", 0.1))
    binner = Binner().fit(X)
    B = binner.transform(X)
    prior = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    base = float(math.log(prior / (1 - prior)))
    F = np.full(len(y), base)
    trees = []
    opts = dict(
        min_samples_leaf=int(hp.get("min_samples_leaf", 2)),
        min_child_weight=float(hp.get("min_child_weight", 1e-3)),
        reg_lambda=float(hp.get("reg_lambda", 1.0)),
    )
    if kind is ClassifierKind.GBDT_LEAFWISE:
        opts["max_leaves"] = int(hp.get("num_leaves", 31))
        opts["max_depth"] = hp.get("max_depth")
    else:
        opts["max_depth"] = int(hp.get("max_depth", 6))
    for _ in range(int(hp.get("n_estimators", 100))):
        p = _sigmoid(F)
        g = p - y
        h = p * (1 - p)
        tree = fit_newton_tree(B, binner, g, h, **opts)
        trees.append(tree)
        F += lr * tree.predict(X)
    return BoostedModel(base, lr, trees, X.shape[1], seed, dict(hp), kind)


def train(kind, X, y, hyperparams=None, seed: int = 0):
    """Fit one classifier.

    Raises
    ------
    SingleClass
        ``y`` holds only one class.
    DimensionMismatch
        ``X`` and ``y`` disagree in length or ``X`` is not two-dimensional.
    """
    kind = ClassifierKind(kind)
    X, y = _check_xy(X, y)
    hp = dict(DEFAULT_HYPERPARAMS[kind])
    hp.update(hyperparams or {})
    if kind is ClassifierKind.SVM_RBF:
        return _train_svm(X, y, hp, seed)
    if kind is ClassifierKind.RANDOM_FOREST:
        return _train_forest(X, y, hp, seed)
    return _train_boosted(X, y, hp, seed, kind)


def predict_proba(model, X) -> np.ndarray:
    """Probability of class 1 for each row of ``X`` (a single row is accepted)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    return np.clip(model.predict_proba(X), 0.0, 1.0)


def predict(model, X) -> np.ndarray:
    return (predict_proba(model, X) >= 0.5).astype(int)


def ensemble_predict(models, X, mode: str = "mean") -> np.ndarray:
    """Equal-weight ensemble of the four classifier kinds.

    ``mode="mean"`` averages member probabilities.  ``mode="vote"`` returns the
    fraction of members deciding positive, so a 2-2 split gives 0.5 and the
    usual ``p >= 0.5`` decision breaks ties toward the positive class.
    """
    if isinstance(models, dict):
        missing = [k.value for k in KINDS if k not in models]
        if missing:
            raise ModelMissing(f"ensemble lacks {', '.join(missing)}")
        members = [models[k] for k in KINDS]
    else:
        members = list(models)
        if not members:
            raise ModelMissing("ensemble has no members")
    probs = np.vstack([predict_proba(m, X) for m in members])
    if mode == "mean":
        return probs.mean(axis=0)
    if mode == "vote":
        return (probs >= 0.5).mean(axis=0)
    raise ValidationError(f"unknown ensemble mode {mode!r}")


def model_to_dict(model) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind.value,
        "n_features": model.n_features,
        "seed": model.seed,
        "hyperparams": model.hyperparams,
        "params": model.params(),
    }


def model_from_dict(d: dict):
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version {d.get('format_version')!r}")
    kind = ClassifierKind(d["kind"])
    meta = {"n_features": int(d["n_features"]), "seed": int(d["seed"]), "hyperparams": dict(d["hyperparams"])}
    if kind in (ClassifierKind.GBDT_LEAFWISE, ClassifierKind.GBDT_DEPTHWISE):
        meta["kind"] = kind
    return _MODEL_CLASSES[kind].from_params(d["params"], **meta)


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
