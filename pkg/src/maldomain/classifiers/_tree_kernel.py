"""Compiled C4.5 grower. Mirrors ``tree._grow_numpy`` operation for operation."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _entr(x):
    if x > 0.0:
        return -x * math.log(x)
    return 0.0


@njit(cache=True)
def _h(p):
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    return (_entr(p) + _entr(1.0 - p)) / math.log(2.0)


@njit(cache=True)
def _class_weights(idx, start, end, y, w):
    w0 = 0.0
    w1 = 0.0
    for t in range(start, end):
        i = idx[t]
        if y[i] > 0.5:
            w1 += w[i]
        else:
            w0 += w[i]
    return w0, w1


@njit(cache=True)
def _best_split(X, y, w, idx, srt, start, end, feats, min_leaf):
    # srt[f, start:end] holds the node's samples sorted by feature f, ties
    # in ascending sample order, which is what a stable argsort would give
    m = end - start
    lo = min_leaf - 1
    hi = m - min_leaf
    if hi <= lo:
        return -1, 0.0
    W = 0.0
    M = 0.0
    for t in range(start, end):
        i = idx[t]
        W += w[i]
        M += w[i] * y[i]
    h_parent = _h(M / W)
    nf = feats.shape[0]
    gains = np.zeros(nf)
    ratios = np.zeros(nf)
    thresholds = np.zeros(nf)
    ok = np.zeros(nf, dtype=np.bool_)
    code = np.empty(m, dtype=np.int8)
    for c in range(nf):
        f = feats[c]
        # class code of each equal-value block: 0/1 pure, 2 mixed
        b0 = 0
        while b0 < m:
            b1 = b0 + 1
            v = X[srt[f, start + b0], f]
            k = 1 if y[srt[f, start + b0]] > 0.5 else 0
            while b1 < m and not X[srt[f, start + b1], f] > v:
                if (1 if y[srt[f, start + b1]] > 0.5 else 0) != k:
                    k = 2
                b1 += 1
            for q in range(b0, b1):
                code[q] = k
            b0 = b1
        last = hi - 1
        while last >= lo and not X[srt[f, start + last + 1], f] > X[srt[f, start + last], f]:
            last -= 1
        first = True
        cw = 0.0
        cm = 0.0
        best = -np.inf
        best_pos = -1
        best_cw = 0.0
        for p in range(hi):
            i = srt[f, start + p]
            cw += w[i]
            cm += w[i] * y[i]
            if p < lo:
                continue
            if not X[srt[f, start + p + 1], f] > X[i, f]:
                continue
            # entropy is concave along a run of one class, so only cuts
            # touching a class change or the ends of the allowed range
            # can be optimal
            if not (first or p == last or code[p] != code[p + 1] or code[p] == 2):
                continue
            first = False
            rw = W - cw
            rm = M - cm
            hl = _h(cm / cw) if cw > 0 else _h(0.0)
            hr = _h(rm / rw) if rw > 0 else _h(0.0)
            g = h_parent - (cw * hl + rw * hr) / W
            if g > best:
                best = g
                best_pos = p
                best_cw = cw
        if best_pos < 0:
            continue
        ok[c] = True
        g = best if best > 0.0 else 0.0
        gains[c] = g
        si = _h(best_cw / W)
        ratios[c] = g / si if si > 0 else 0.0
        a = X[srt[f, start + best_pos], f]
        b = X[srt[f, start + best_pos + 1], f]
        mid = 0.5 * (a + b)
        thresholds[c] = a if mid >= b else mid
    n_ok = 0
    total = 0.0
    for c in range(nf):
        if ok[c]:
            n_ok += 1
            total += gains[c]
    if n_ok == 0:
        return -1, 0.0
    avg = total / n_ok
    pick = -1
    best_ratio = -np.inf
    for c in range(nf):
        score = ratios[c] if (ok[c] and gains[c] >= avg - 1e-12) else -1.0
        if score > best_ratio:
            best_ratio = score
            pick = c
    return feats[pick], thresholds[pick]


@njit(cache=True)
def _partition(row, start, end, goes_left, buf):
    nl = 0
    for k in range(start, end):
        if goes_left[row[k]]:
            buf[nl] = row[k]
            nl += 1
    nr = nl
    for k in range(start, end):
        if not goes_left[row[k]]:
            buf[nr] = row[k]
            nr += 1
    for k in range(end - start):
        row[start + k] = buf[k]
    return nl


@njit(cache=True)
def grow_c45(X, y, w, min_leaf, depth_cap, mtry, feature_draws):
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, 2))
    idx = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.bool_)
    all_feats = np.arange(d)
    srt = np.empty((d, n), dtype=np.int64)
    for f in range(d):
        srt[f] = np.argsort(X[:, f], kind="mergesort")

    s_node = np.empty(cap, dtype=np.int64)
    s_start = np.empty(cap, dtype=np.int64)
    s_end = np.empty(cap, dtype=np.int64)
    s_depth = np.empty(cap, dtype=np.int64)

    w0, w1 = _class_weights(idx, 0, n, y, w)
    value[0, 0] = w0
    value[0, 1] = w1
    n_nodes = 1
    s_node[0] = 0
    s_start[0] = 0
    s_end[0] = n
    s_depth[0] = 0
    top = 1
    attempts = 0
    while top > 0:
        top -= 1
        node = s_node[top]
        start = s_start[top]
        end = s_end[top]
        depth = s_depth[top]
        if value[node, 0] <= 0 or value[node, 1] <= 0 or end - start < 2 * min_leaf:
            continue
        if depth_cap >= 0 and depth >= depth_cap:
            continue
        if mtry < d:
            feats = np.sort(np.argsort(feature_draws[attempts], kind="mergesort")[:mtry])
        else:
            feats = all_feats
        attempts += 1
        f, t = _best_split(X, y, w, idx, srt, start, end, feats, min_leaf)
        if f < 0:
            continue
        for k in range(start, end):
            i = idx[k]
            goes_left[i] = X[i, f] <= t
        mid = start + _partition(idx, start, end, goes_left, buf)
        for g in range(d):
            _partition(srt[g], start, end, goes_left, buf)
        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        a0, a1 = _class_weights(idx, start, mid, y, w)
        b0, b1 = _class_weights(idx, mid, end, y, w)
        value[li, 0] = a0
        value[li, 1] = a1
        value[ri, 0] = b0
        value[ri, 1] = b1
        feature[node] = f
        threshold[node] = t
        left[node] = li
        right[node] = ri
        s_node[top] = ri
        s_start[top] = mid
        s_end[top] = end
        s_depth[top] = depth + 1
        top += 1
        s_node[top] = li
        s_start[top] = start
        s_end[top] = mid
        s_depth[top] = depth + 1
        top += 1
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )
