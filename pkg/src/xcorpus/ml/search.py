"""Participant-grouped folds and exhaustive hyperparameter search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyGrid, SingleClass
from ..metrics import roc_auc
from ..seeding import derive_seed
from .models import ClassifierKind, predict_proba, train
from .smote import SMOTE_TRIGGER, smote


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grid per classifier kind: ``{kind: {name: [values]}}``."""

    grids: dict = field(default_factory=dict)

    def __post_init__(self):
        grids = {ClassifierKind(k): {n: list(v) for n, v in g.items()} for k, g in self.grids.items()}
        for kind, g in grids.items():
            if not g or any(len(v) == 0 for v in g.values()):
                raise EmptyGrid(f"grid for {kind.value} is empty")
        object.__setattr__(self, "grids", grids)

    def cells(self, kind) -> list:
        """Every combination for ``kind`` in first-axis-major order."""
        kind = ClassifierKind(kind)
        g = self.grids.get(kind)
        if not g:
            raise EmptyGrid(f"no grid for {kind.value}")
        names = list(g)
        return [dict(zip(names, combo)) for combo in itertools.product(*(g[n] for n in names))]

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(d)

    def to_dict(self) -> dict:
        return {k.value: g for k, g in self.grids.items()}


DEFAULT_GRID = GridSpec({
    ClassifierKind.SVM_RBF: {"C": [0.1, 1.0, 10.0], "gamma": [0.01, 0.1, 1.0]},
    ClassifierKind.RANDOM_FOREST: {"n_estimators": [100, 300], "max_depth": [3, 6, 31]},
    ClassifierKind.GBDT_LEAFWISE: {"n_estimators": [100, 300], "num_leaves": [3, 6, 31],
                                   "learning_rate": [0.05, 0.1]},
    ClassifierKind.GBDT_DEPTHWISE: {"n_estimators": [100, 300], "max_depth": [3, 6, 31],
                                    "learning_rate": [0.05, 0.1]},
})


def participant_folds(groups, n_folds: int, seed: int, labels=None) -> list:
    """Split unique groups into ``n_folds`` sets whose sizes differ by at most one.

    Groups are sorted, shuffled with ``seed`` and dealt round-robin.  When
    ``labels`` is given the shuffled groups are first ordered by their mean
    label (stable), which spreads positives across folds.
    Returns a list of arrays of group ids.
    """
    uniq = np.array(sorted(set(np.asarray(groups).tolist())), dtype=object)
    rng = np.random.default_rng(seed)
    order = uniq[rng.permutation(len(uniq))]
    if labels is not None:
        groups = np.asarray(groups)
        labels = np.asarray(labels, dtype=float)
        means = np.array([labels[groups == g].mean() for g in order])
        order = order[np.argsort(means, kind="stable")]
    return [order[i::n_folds] for i in range(n_folds)]


def grid_search(kind, X, y, groups, grid: GridSpec, inner_folds: int = 3, seed: int = 0,
                smote_trigger: float = SMOTE_TRIGGER):
    """Pick hyperparameters by participant-grouped inner cross-validation.

    Only training data enters: every cell is scored by the mean AUC over the
    inner folds (folds whose train or test part is single-class are skipped),
    the highest mean wins and ties go to the earlier cell.  Returns
    ``(best_params, scores)``.
    """
    kind = ClassifierKind(kind)
    cells = grid.cells(kind)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    groups = np.asarray(groups)
    if len(cells) == 1:
        return dict(cells[0]), [np.nan]
    n_groups = len(set(groups.tolist()))
    folds = participant_folds(groups, min(inner_folds, n_groups), derive_seed(seed, "inner"))
    splits = []
    for fi, test_groups in enumerate(folds):
        test = np.isin(groups, test_groups)
        tr_y, te_y = y[~test], y[test]
        if len(set(tr_y.tolist())) < 2 or len(set(te_y.tolist())) < 2:
            continue
        Xtr, ytr = X[~test], tr_y
        try:
            Xtr, ytr = smote(Xtr, ytr, seed=derive_seed(seed, "inner-smote", fi), trigger=smote_trigger)
        except ValueError:
            pass
        splits.append((Xtr, ytr, X[test], te_y))
    scores = []
    for ci, params in enumerate(cells):
        aucs = []
        for fi, (Xtr, ytr, Xte, yte) in enumerate(splits):
            try:
                model = train(kind, Xtr, ytr, params, derive_seed(seed, "cell", ci, fi))
            except SingleClass:
                continue
            aucs.append(roc_auc(predict_proba(model, Xte), yte))
        scores.append(float(np.mean(aucs)) if aucs else -np.inf)
    best = int(np.argmax(scores))
    return dict(cells[best]), scores
