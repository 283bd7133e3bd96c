"""Slow, obviously-correct reference implementations used only by the tests.

None of these import the code under test's internals; each recomputes its
answer from first principles.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def knn_label(X, y, q, k):
    """Exhaustive scan: sort by (distance, index), majority vote, ties malicious."""
    dists = []
    for i, row in enumerate(X):
        dists.append((sum((a - b) ** 2 for a, b in zip(row, q)), i))
    dists.sort()
    chosen = [i for _, i in dists[:k]]
    votes = sum(int(y[i]) for i in chosen)
    return 1 if 2 * votes >= len(chosen) else 0


def recount(actual, predicted):
    tp = fn = fp = tn = 0
    for a, p in zip(actual, predicted):
        if a == 1 and p == 1:
            tp += 1
        elif a == 1:
            fn += 1
        elif p == 1:
            fp += 1
        else:
            tn += 1
    total = tp + fn + fp + tn
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None or precision + recall == 0:
        f = None
    else:
        f = 2.0 * precision * recall / (precision + recall)
    return (tp, fn, fp, tn), ((tp + tn) / total, precision, recall, f)


def central_difference(fun, theta, h=1e-6):
    theta = np.asarray(theta, dtype=np.float64)
    g = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return g


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def _project_box_hyperplane(v, y, C):
    """Euclidean projection onto {0 <= a <= C, y.a = 0}.

    ``r(lam) = y . clip(v - lam*y, 0, C)`` is piecewise linear and
    non-increasing in ``lam``; locate its root among the breakpoints and
    interpolate.
    """
    bps = np.unique(np.concatenate([v / y, (v - C) / y]))
    r = (np.clip(v[None, :] - bps[:, None] * y[None, :], 0.0, C) * y).sum(axis=1)
    j = int(np.searchsorted(-r, 0.0))  # first breakpoint with r <= 0
    if j == 0:
        lam = bps[0]
    elif j == len(bps):
        lam = bps[-1]
    else:
        r0, r1 = r[j - 1], r[j]
        lam = bps[j - 1] + (bps[j] - bps[j - 1]) * r0 / (r0 - r1) if r0 != r1 else bps[j]
    return np.clip(v - lam * y, 0.0, C)


def svm_dual_oracle(K, y, C, iterations=100000, tol=1e-13):
    """Maximise sum(a) - 1/2 a'Qa over the dual feasible set.

    Accelerated projected gradient with function-value restarts. Returns
    the objective in maximisation form and the multipliers.
    """
    y = np.asarray(y, dtype=np.float64)
    Q = (y[:, None] * y[None, :]) * K
    L = float(np.linalg.eigvalsh(Q).max()) + 1e-12

    def f(a):
        return 0.5 * a @ Q @ a - a.sum()

    a = np.zeros(len(y))
    z, t, fa = a.copy(), 1.0, 0.0
    restarted = False
    for _ in range(iterations):
        a_next = _project_box_hyperplane(z - (Q @ z - 1.0) / L, y, C)
        f_next = f(a_next)
        if f_next > fa:
            if restarted:  # a plain projected step no longer descends
                break
            z, t, restarted = a.copy(), 1.0, True
            continue
        restarted = False
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        step = np.abs(a_next - a).max()
        z = a_next + (t - 1) / t_next * (a_next - a)
        a, t, fa = a_next, t_next, f_next
        if step < tol:
            break
    return float(-fa), a


def mid_ranks(values):
    """1-based ranks, ties sharing the average rank (pure Python)."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def wilcoxon_enumeration(x, y):
    """Two-sided exact p by visiting all 2^n sign patterns of the nonzero differences."""
    d = [a - b for a, b in zip(x, y) if a != b]
    n = len(d)
    if n == 0:
        return 1.0, 0
    doubled = [int(round(2 * r)) for r in mid_ranks([abs(v) for v in d])]
    plus = sum(r for r, v in zip(doubled, d) if v > 0)
    minus = sum(doubled) - plus
    w = min(plus, minus)
    count = 0
    for signs in itertools.product((0, 1), repeat=n):
        if sum(r for r, s in zip(doubled, signs) if s) <= w:
            count += 1
    return min(1.0, 2.0 * count / 2.0**n), n


def friedman_block_ranks(row):
    """Rank one block, best (largest) = 1."""
    return mid_ranks([-v for v in row])


def best_threshold_by_gain(x, y):
    """Exhaustive information-gain threshold scan for one feature (unit weights)."""

    def h(labels):
        if not labels:
            return 0.0
        p = sum(labels) / len(labels)
        return -sum(q * math.log2(q) for q in (p, 1 - p) if q > 0)

    pairs = sorted(zip(x, y))
    n = len(pairs)
    parent = h([lab for _, lab in pairs])
    best = (-1.0, None)
    for i in range(n - 1):
        if pairs[i + 1][0] <= pairs[i][0]:
            continue
        left = [lab for _, lab in pairs[: i + 1]]
        right = [lab for _, lab in pairs[i + 1 :]]
        gain = parent - (len(left) * h(left) + len(right) * h(right)) / n
        if gain > best[0] + 1e-12:
            best = (gain, (pairs[i][0] + pairs[i + 1][0]) / 2)
    return best
