"""Tree learners: CART classification trees for the random forest and
second-order regression trees for gradient boosting.

Features are pre-binned once per fit (exact for up to ``max_bins`` distinct
values, quantile edges beyond) and node splits are found from per-bin
histograms.  A split sends ``x <= threshold`` to the left child.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

MAX_BINS = 255


class Binner:
    def __init__(self, max_bins: int = MAX_BINS):
        self.max_bins = max_bins

    def fit(self, X: np.ndarray) -> "Binner":
        self.edges = []
        for j in range(X.shape[1]):
            u = np.unique(X[:, j])
            if len(u) > self.max_bins:
                q = np.quantile(X[:, j], np.linspace(0, 1, self.max_bins + 1)[1:-1])
                u = np.unique(q)
                edges = u
            else:
                edges = (u[:-1] + u[1:]) / 2.0
                # midpoint can round onto the upper value
                edges = np.where(edges >= u[1:], u[:-1], edges)
            self.edges.append(np.asarray(edges, dtype=float))
        self.n_bins = max((len(e) for e in self.edges), default=0) + 1
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        B = np.empty(X.shape, dtype=np.int64)
        for j, e in enumerate(self.edges):
            B[:, j] = np.searchsorted(e, X[:, j], side="left")
        return B


@dataclass
class Tree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while np.any(active):
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))


class _Builder:
    """Accumulates nodes and converts them to a :class:`Tree`."""

    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.feature) - 1

    def make_split(self, node: int, feature: int, threshold: float, left: int, right: int):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=float),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=float),
        )


def _histograms(B, idx, feats, n_bins, weights):
    """Per-(feature, bin) sums of each weight vector over rows ``idx``."""
    sub = B[np.ix_(idx, feats)] + (np.arange(len(feats)) * n_bins)[None, :]
    flat = sub.ravel()
    size = len(feats) * n_bins
    out = []
    for w in weights:
        if w is None:
            h = np.bincount(flat, minlength=size)
        else:
            h = np.bincount(flat, weights=np.repeat(w[idx], len(feats)), minlength=size)
        out.append(h.reshape(len(feats), n_bins).astype(float))
    return out


def _valid_mask(binner, feats, n_bins, cnt_l, cnt_r, min_leaf):
    n_edges = np.array([len(binner.edges[f]) for f in feats])
    ok = np.arange(n_bins)[None, :] < n_edges[:, None]
    return ok & (cnt_l >= min_leaf) & (cnt_r >= min_leaf)


# ---------------------------------------------------------------------------
# gini trees


def _best_gini_split(B, y, idx, feats, binner, min_leaf):
    n_bins = binner.n_bins
    cnt, pos = _histograms(B, idx, feats, n_bins, [None, y])
    cnt_l = np.cumsum(cnt, axis=1)
    pos_l = np.cumsum(pos, axis=1)
    n = float(len(idx))
    p_tot = pos_l[0, -1]
    cnt_r = n - cnt_l
    pos_r = p_tot - pos_l
    valid = _valid_mask(binner, feats, n_bins, cnt_l, cnt_r, min_leaf)
    if not np.any(valid):
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score_l = (pos_l ** 2 + (cnt_l - pos_l) ** 2) / cnt_l
        score_r = (pos_r ** 2 + (cnt_r - pos_r) ** 2) / cnt_r
    score = np.where(valid, score_l + score_r, -np.inf)
    parent = (p_tot ** 2 + (n - p_tot) ** 2) / n
    k = int(np.argmax(score))
    fi, b = divmod(k, n_bins)
    if score[fi, b] <= parent + 1e-12:
        return None
    f = feats[fi]
    return f, b, float(binner.edges[f][b])


def fit_gini_tree(X, y, max_depth, rng, max_features=None, min_samples_leaf=1, binner=None, B=None):
    """CART classification tree; leaves store the fraction of positives."""
    y = np.asarray(y, dtype=float)
    if binner is None:
        binner = Binner().fit(X)
    if B is None:
        B = binner.transform(X)
    d = X.shape[1]
    m_try = d if max_features is None else max(1, min(d, int(max_features)))
    tb = _Builder()
    stack = [(tb.add_leaf(y.mean()), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        p = y[idx].mean()
        if depth >= max_depth or p == 0.0 or p == 1.0 or len(idx) < 2 * min_samples_leaf:
            continue
        feats = np.sort(rng.choice(d, m_try, replace=False)) if m_try < d else np.arange(d)
        split = _best_gini_split(B, y, idx, feats, binner, min_samples_leaf)
        if split is None:
            continue
        f, b, thr = split
        go_left = B[idx, f] <= b
        li, ri = idx[go_left], idx[~go_left]
        ln, rn = tb.add_leaf(y[li].mean()), tb.add_leaf(y[ri].mean())
        tb.make_split(node, f, thr, ln, rn)
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))
    return tb.build()


# ---------------------------------------------------------------------------
# second-order regression trees


def _best_newton_split(B, g, h, idx, feats, binner, min_leaf, min_child_weight, reg_lambda):
    n_bins = binner.n_bins
    cnt, gh, hh = _histograms(B, idx, feats, n_bins, [None, g, h])
    cnt_l = np.cumsum(cnt, axis=1)
    g_l = np.cumsum(gh, axis=1)
    h_l = np.cumsum(hh, axis=1)
    G, H, n = g_l[0, -1], h_l[0, -1], float(len(idx))
    g_r, h_r, cnt_r = G - g_l, H - h_l, n - cnt_l
    valid = _valid_mask(binner, feats, n_bins, cnt_l, cnt_r, min_leaf)
    valid &= (h_l >= min_child_weight) & (h_r >= min_child_weight)
    if not np.any(valid):
        return None
    gain = g_l ** 2 / (h_l + reg_lambda) + g_r ** 2 / (h_r + reg_lambda) - G ** 2 / (H + reg_lambda)
    gain = np.where(valid, gain, -np.inf)
    k = int(np.argmax(gain))
    fi, b = divmod(k, n_bins)
    if gain[fi, b] <= 1e-12:
        return None
    f = feats[fi]
    return float(gain[fi, b]), f, b, float(binner.edges[f][b])


def _newton_leaf(g, h, idx, reg_lambda):
    return -np.sum(g[idx]) / (np.sum(h[idx]) + reg_lambda)


def fit_newton_tree(
    B,
    binner,
    g,
    h,
    *,
    max_depth=None,
    max_leaves=None,
    min_samples_leaf=2,
    min_child_weight=1e-3,
    reg_lambda=1.0,
):
    """Regression tree on gradients ``g`` and hessians ``h``.

    With ``max_leaves`` the tree grows best-first (highest gain leaf first)
    until it has that many leaves; otherwise it grows level by level down to
    ``max_depth``.  Leaf values are the Newton step ``-G / (H + lambda)``.
    """
    feats = np.arange(B.shape[1])
    tb = _Builder()
    root_idx = np.arange(B.shape[0])
    root = tb.add_leaf(_newton_leaf(g, h, root_idx, reg_lambda))
    depth_cap = np.inf if max_depth is None else max_depth

    def candidate(idx, depth):
        if depth >= depth_cap or len(idx) < 2 * min_samples_leaf:
            return None
        return _best_newton_split(B, g, h, idx, feats, binner, min_samples_leaf, min_child_weight, reg_lambda)

    def split(node, idx, cand):
        _, f, b, thr = cand
        go_left = B[idx, f] <= b
        li, ri = idx[go_left], idx[~go_left]
        ln = tb.add_leaf(_newton_leaf(g, h, li, reg_lambda))
        rn = tb.add_leaf(_newton_leaf(g, h, ri, reg_lambda))
        tb.make_split(node, f, thr, ln, rn)
        return (ln, li), (rn, ri)

    if max_leaves is not None:
        leaves = 1
        heap = []
        counter = 0
        c = candidate(root_idx, 0)
        if c is not None:
            heap.append((-c[0], counter, root, root_idx, 0, c))
        while heap and leaves < max_leaves:
            _, _, node, idx, depth, c = heapq.heappop(heap)
            for child, cidx in split(node, idx, c):
                cc = candidate(cidx, depth + 1)
                if cc is not None:
                    counter += 1
                    heapq.heappush(heap, (-cc[0], counter, child, cidx, depth + 1, cc))
            leaves += 1
    else:
        level = [(root, root_idx)]
        depth = 0
        while level and depth < depth_cap:
            nxt = []
            for node, idx in level:
                c = candidate(idx, depth)
                if c is not None:
                    nxt.extend(split(node, idx, c))
            level = nxt
            depth += 1
    return tb.build()
