"""Decision trees on continuous features.

Classification trees follow C4.5: binary threshold splits at midpoints of
adjacent distinct values, the threshold of each attribute chosen by
information gain and the attribute chosen by gain ratio among those whose
gain is at least average, and error-based (pessimistic) pruning controlled
by a confidence factor. The same grower, with sample weights, depth limits
and per-node feature sampling, backs bagging, AdaBoost and random forests.

Regression trees are least-squares trees over a presorted index and are
used by the gradient boosting model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr
from scipy.stats import norm

from .base import BaseModel, C45Params, Family

_LN2 = math.log(2.0)


def binary_entropy(p):
    """Entropy in bits of a Bernoulli(p) distribution (vectorised, 0 log 0 = 0)."""
    p = np.clip(p, 0.0, 1.0)
    return (entr(p) + entr(1.0 - p)) / _LN2


def entropy_of_labels(labels) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(entr(p).sum() / _LN2)


def gain_ratio(parent_labels, left_mask) -> float:
    """Information gain of a binary partition divided by its split information.

    ``left_mask`` marks the members of ``parent_labels`` that go left.
    Returns 0 when the split information is 0 (one side empty).
    """
    labels = np.asarray(parent_labels)
    left = np.asarray(left_mask, dtype=bool)
    if len(labels) == 0:
        raise ValueError("parent must be non-empty")
    n = len(labels)
    n_left = int(left.sum())
    split_info = float(binary_entropy(n_left / n))
    if split_info == 0.0:
        return 0.0
    children = (
        n_left / n * entropy_of_labels(labels[left])
        + (n - n_left) / n * entropy_of_labels(labels[~left])
    )
    gain = entropy_of_labels(labels) - children
    return max(gain, 0.0) / split_info


@dataclass(frozen=True, eq=False)
class TreeArrays:
    """Flat binary tree. Leaves have ``feature == -1``; ``x <= threshold`` goes left.

    ``value`` holds per-node class weights ``[benign, malicious]`` for
    classification trees and the leaf output for regression trees.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.where(internal, feat, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def leaf_malicious_fraction(self, X: np.ndarray) -> np.ndarray:
        counts = self.value[self.apply(X)]
        total = counts.sum(axis=1)
        return np.divide(counts[:, 1], total, out=np.full(len(total), 0.5), where=total > 0)


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def finish(self) -> TreeArrays:
        return TreeArrays(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=np.float64),
        )


def _midpoint(a: float, b: float) -> float:
    t = 0.5 * (a + b)
    return a if t >= b else t


def _best_classification_split(Xn, yn, wn, feats, min_leaf):
    m = len(yn)
    lo, hi = min_leaf - 1, m - min_leaf
    if hi <= lo:
        return None
    Xs = Xn[:, feats]
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    w_sorted = wn[order]
    m_sorted = (wn * yn)[order]
    W = float(np.cumsum(wn)[-1])
    M = float(np.cumsum(wn * yn)[-1])
    cw = np.cumsum(w_sorted, axis=0)[lo:hi]
    cm = np.cumsum(m_sorted, axis=0)[lo:hi]
    valid = xs[lo + 1 : hi + 1] > xs[lo:hi]
    if not valid.any():
        return None
    rw = W - cw
    rm = M - cm
    with np.errstate(divide="ignore", invalid="ignore"):
        child = (
            cw * binary_entropy(np.where(cw > 0, cm / cw, 0.0))
            + rw * binary_entropy(np.where(rw > 0, rm / rw, 0.0))
        ) / W
    gain = np.where(valid, binary_entropy(M / W) - child, -np.inf)
    pos = np.argmax(gain, axis=0)
    cols = np.arange(len(feats))
    best_gain = gain[pos, cols]
    ok = np.isfinite(best_gain)
    gains = np.where(ok, np.maximum(best_gain, 0.0), 0.0)
    split_info = binary_entropy(cw[pos, cols] / W)
    ratio = np.divide(gains, split_info, out=np.zeros_like(gains), where=split_info > 0)
    avg = gains[ok].mean()
    candidates = ok & (gains >= avg - 1e-12)
    c = int(np.argmax(np.where(candidates, ratio, -1.0)))
    i = pos[c] + lo
    return int(feats[c]), _midpoint(float(xs[i, c]), float(xs[i + 1, c]))


def grow_classification_tree(
    X,
    y,
    sample_weight=None,
    *,
    min_leaf: int = 2,
    max_depth: int | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    backend: str = "numba",
) -> TreeArrays:
    """Grow a C4.5-style tree until nodes are pure, too small, or at ``max_depth``.

    With ``max_features`` set, each split attempt considers a fresh random
    subset of that many columns: the ``k``-th attempt takes the columns
    holding the ``max_features`` smallest entries of row ``k`` of a uniform
    matrix drawn from ``rng`` up front.

    ``backend="numpy"`` selects the slower vectorised grower; both produce
    the same tree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    mtry = d if max_features is None else min(int(max_features), d)
    if mtry < d:
        if rng is None:
            raise ValueError("feature sampling needs an rng")
        feature_draws = rng.random((2 * n + 1, d))
    else:
        feature_draws = np.empty((0, d))
    depth_cap = -1 if max_depth is None else int(max_depth)
    if backend == "numba":
        from ._tree_kernel import grow_c45

        feature, threshold, left, right, value = grow_c45(
            X, y, w, int(min_leaf), depth_cap, mtry, feature_draws
        )
        return TreeArrays(feature, threshold, left, right, value)
    if backend != "numpy":
        raise ValueError(f"unknown backend {backend!r}")
    return _grow_numpy(X, y, w, int(min_leaf), depth_cap, mtry, feature_draws)


def _grow_numpy(X, y, w, min_leaf, depth_cap, mtry, feature_draws) -> TreeArrays:
    n, d = X.shape
    all_feats = np.arange(d)
    b = _Builder()
    root = b.add(_class_weights(y, w))
    stack = [(root, np.arange(n), 0)]
    attempts = 0
    while stack:
        node, idx, depth = stack.pop()
        w0, w1 = b.value[node]
        if w0 <= 0 or w1 <= 0 or len(idx) < 2 * min_leaf:
            continue
        if depth_cap >= 0 and depth >= depth_cap:
            continue
        if mtry < d:
            feats = np.sort(np.argsort(feature_draws[attempts], kind="stable")[:mtry])
        else:
            feats = all_feats
        attempts += 1
        split = _best_classification_split(X[idx], y[idx], w[idx], feats, min_leaf)
        if split is None:
            continue
        f, t = split
        go_left = X[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        left = b.add(_class_weights(y[li], w[li]))
        right = b.add(_class_weights(y[ri], w[ri]))
        b.feature[node], b.threshold[node] = f, t
        b.left[node], b.right[node] = left, right
        # right pushed first so the left subtree is expanded first
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.finish()


def _class_weights(y, w):
    return [float(w[y < 0.5].sum()), float(w[y > 0.5].sum())]


# ---------------------------------------------------------------------------
# Pessimistic pruning


def _upper_error_bound(n: float, e: float, cf: float, coeff: float) -> float:
    """Extra errors added to ``e`` observed errors out of ``n`` at confidence ``cf``."""
    if n <= 0:
        return 0.0
    if e < 1e-6:
        return n * (1.0 - math.exp(math.log(cf) / n))
    if e < 0.9999:
        v = n * (1.0 - math.exp(math.log(cf) / n))
        return v + e * (_upper_error_bound(n, 1.0, cf, coeff) - v)
    if e + 0.5 >= n:
        return 0.67 * (n - e)
    pr = (
        e
        + 0.5
        + coeff / 2.0
        + math.sqrt(coeff * ((e + 0.5) * (1.0 - (e + 0.5) / n) + coeff / 4.0))
    ) / (n + coeff)
    return n * pr - e


def prune_pessimistic(tree: TreeArrays, confidence: float) -> TreeArrays:
    """Collapse every subtree whose estimated error is no better than a leaf's."""
    coeff = norm.ppf(1.0 - confidence) ** 2
    n_nodes = tree.n_nodes
    estimate = np.zeros(n_nodes)
    collapsed = tree.feature < 0
    # children always have larger indices than their parent
    for i in range(n_nodes - 1, -1, -1):
        counts = tree.value[i]
        total = float(counts.sum())
        errors = total - float(counts.max())
        leaf_est = errors + _upper_error_bound(total, errors, confidence, coeff)
        if tree.feature[i] < 0:
            estimate[i] = leaf_est
            continue
        subtree_est = estimate[tree.left[i]] + estimate[tree.right[i]]
        if leaf_est <= subtree_est + 0.1:
            collapsed[i] = True
            estimate[i] = leaf_est
        else:
            estimate[i] = subtree_est
    return _compact(tree, collapsed)


def _compact(tree: TreeArrays, is_leaf: np.ndarray) -> TreeArrays:
    b = _Builder()
    stack = [(0, b.add(tree.value[0].tolist()))]
    while stack:
        old, new = stack.pop()
        if is_leaf[old]:
            continue
        left = b.add(tree.value[tree.left[old]].tolist())
        right = b.add(tree.value[tree.right[old]].tolist())
        b.feature[new], b.threshold[new] = int(tree.feature[old]), float(tree.threshold[old])
        b.left[new], b.right[new] = left, right
        stack.append((tree.right[old], right))
        stack.append((tree.left[old], left))
    return b.finish()


@dataclass(frozen=True, eq=False)
class TreeModel(BaseModel):
    """A single classification tree; score is ``2 * leaf_malicious_fraction - 1``."""

    tree: TreeArrays
    n_features: int
    family = Family.C45

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return 2.0 * self.tree.leaf_malicious_fraction(X) - 1.0


class C45Model(TreeModel):
    @classmethod
    def fit(cls, X, y, params: C45Params) -> "C45Model":
        tree = grow_classification_tree(X, y, min_leaf=params.min_leaf, max_depth=params.max_depth)
        if params.prune:
            tree = prune_pessimistic(tree, params.confidence)
        return cls(tree, X.shape[1])


# ---------------------------------------------------------------------------
# Regression trees


def presort(X: np.ndarray) -> np.ndarray:
    """Column-wise stable argsort, transposed to shape ``(d, n)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def _best_regression_split(X, r, order_t, in_node, m, min_obs):
    d, n = order_t.shape
    lo, hi = min_obs - 1, m - min_obs
    if hi <= lo:
        return None
    if m == n:
        idx = order_t
    else:
        idx = order_t[in_node[order_t]].reshape(d, m)
    xs = X[idx, np.arange(d)[:, None]]
    cs = np.cumsum(r[idx], axis=1)
    total = cs[:, -1:]
    left_sum = cs[:, lo:hi]
    n_left = np.arange(lo + 1, hi + 1, dtype=np.float64)
    score = left_sum**2 / n_left + (total - left_sum) ** 2 / (m - n_left)
    score = np.where(xs[:, lo + 1 : hi + 1] > xs[:, lo:hi], score, -np.inf)
    flat = int(np.argmax(score))
    f, p = divmod(flat, score.shape[1])
    best = score[f, p]
    parent = float(total[0, 0]) ** 2 / m
    if not np.isfinite(best) or best - parent <= 1e-12 * max(1.0, abs(parent)):
        return None
    i = p + lo
    return int(f), _midpoint(float(xs[f, i]), float(xs[f, i + 1]))


def grow_regression_tree(
    X,
    residual,
    hessian,
    *,
    max_depth: int = 1,
    min_obs: int = 10,
    order_t: np.ndarray | None = None,
) -> TreeArrays:
    """Least-squares tree on ``residual``; leaf value ``sum(residual) / sum(hessian)``.

    A leaf whose hessian sum is 0 gets value 0.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if order_t is None:
        order_t = presort(X)

    def leaf_value(mask):
        h = float(hessian[mask].sum())
        return float(residual[mask].sum()) / h if h > 0 else 0.0

    b = _Builder()
    everyone = np.ones(n, dtype=bool)
    root = b.add(leaf_value(everyone))
    stack = [(root, everyone, 0)]
    while stack:
        node, in_node, depth = stack.pop()
        if depth >= max_depth:
            continue
        m = int(in_node.sum())
        split = _best_regression_split(X, residual, order_t, in_node, m, min_obs)
        if split is None:
            continue
        f, t = split
        below = X[:, f] <= t
        lmask, rmask = in_node & below, in_node & ~below
        left, right = b.add(leaf_value(lmask)), b.add(leaf_value(rmask))
        b.feature[node], b.threshold[node] = f, t
        b.left[node], b.right[node] = left, right
        stack.append((right, rmask, depth + 1))
        stack.append((left, lmask, depth + 1))
    return b.finish()
