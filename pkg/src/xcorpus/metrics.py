"""Accuracy and rank-based ROC AUC."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import Empty, LengthMismatch, SingleClass


def _pair(a, labels):
    a = np.asarray(a, dtype=float).ravel()
    labels = np.asarray(labels, dtype=int).ravel()
    if len(a) != len(labels):
        raise LengthMismatch(f"{len(a)} predictions for {len(labels)} labels")
    if len(a) == 0:
        raise Empty("no predictions")
    return a, labels


def accuracy(decisions, labels) -> float:
    """Fraction of decisions equal to the labels."""
    d, labels = _pair(decisions, labels)
    return float(np.mean(d.astype(int) == labels))


def roc_auc(probs, labels) -> float:
    """Area under the ROC curve as the normalized Mann-Whitney U statistic.

    Tied scores are given midranks, so each tied positive/negative pair
    contributes one half.
    """
    p, labels = _pair(probs, labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = rankdata(p)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
