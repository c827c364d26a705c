"""SMOTE oversampling of the minority class."""

from __future__ import annotations

import numpy as np

from ..errors import MinorityTooSmall
from ..labels import class_balance

# minority/majority ratio below which the training set counts as imbalanced
SMOTE_TRIGGER = 0.8


def smote(X, y, k: int = 5, seed: int = 0, trigger: float = SMOTE_TRIGGER, groups=None):
    """Balance two classes with synthetic minority samples.

    Each synthetic point is ``x_i + u * (x_nn - x_i)`` with ``x_i`` a random
    minority sample, ``x_nn`` one of its ``k`` nearest minority neighbours and
    ``u ~ U(0, 1)``.  Originals come first, unchanged; synthetic rows are
    appended until both classes have equal counts.  Inputs whose minority
    ratio is at least ``trigger`` are returned as they are.

    ``groups``, when given, is extended with the group of each base sample and
    returned as a third value.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n_pos, n_neg, ratio = class_balance(y)
    if ratio >= trigger:
        return (X, y) if groups is None else (X, y, np.asarray(groups))
    minority = 1 if n_pos < n_neg else 0
    idx = np.flatnonzero(y == minority)
    if len(idx) < 2:
        raise MinorityTooSmall(f"minority class has {len(idx)} sample(s); SMOTE needs 2")
    need = abs(n_pos - n_neg)
    rng = np.random.default_rng(seed)
    M = X[idx]
    d2 = ((M[:, None, :] - M[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    k_eff = min(k, len(idx) - 1)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
    base = rng.integers(0, len(idx), need)
    pick = neighbours[base, rng.integers(0, k_eff, need)]
    u = rng.random(need)[:, None]
    synth = M[base] + u * (M[pick] - M[base])
    X_out = np.vstack([X, synth])
    y_out = np.concatenate([y, np.full(need, minority)])
    if groups is None:
        return X_out, y_out
    groups = np.asarray(groups)
    return X_out, y_out, np.concatenate([groups, groups[idx[base]]])
