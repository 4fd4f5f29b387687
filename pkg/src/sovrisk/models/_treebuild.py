"""Compiled kernels for regression-tree growth and traversal.

Trees are grown depth-first on presorted per-feature index arrays that are
stably partitioned at every split, so a level costs O(n * features) without
re-sorting. Randomness comes from a splitmix64 stream seeded per tree.
"""

from __future__ import annotations

import numba
import numpy as np

LEAF = -1


@numba.njit(cache=True, nogil=True)
def _next(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _uniform(state):
    return np.float64(_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, nogil=True)
def _randint(state, n):
    return np.int64(_uniform(state) * n) % n


@numba.njit(cache=True, nogil=True)
def sample_without_replacement(state, n, k):
    """First ``k`` entries of a partial Fisher-Yates shuffle of ``0..n-1``."""
    pool = np.arange(n)
    for i in range(k):
        j = i + _randint(state, n - i)
        t = pool[i]
        pool[i] = pool[j]
        pool[j] = t
    return pool[:k].copy()


@numba.njit(cache=True, nogil=True)
def sample_with_replacement(state, n, k):
    out = np.empty(k, dtype=np.int64)
    for i in range(k):
        out[i] = _randint(state, n)
    return out


def presort(X):
    """Stable argsort of every column, shape (n_features, n_rows)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


@numba.njit(cache=True, nogil=True)
def build_tree(X, y, rows, allowed, sorted_rows, n_try, max_depth, min_split, min_leaf, random_thresholds,
               seed):
    """Grow one CART regression tree.

    Parameters
    ----------
    X, y : training arrays (all rows)
    rows : int64 array of row indices used by this tree; repeats allowed
    allowed : features this tree may split on, ascending
    sorted_rows : output of :func:`presort` on ``X``
    n_try : features drawn per node (without replacement from ``allowed``)
    random_thresholds : draw one uniform threshold per candidate feature

    Returns
    -------
    feature, threshold, left, right, value, cover arrays trimmed to the node count.
    """
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    n = X.shape[0]
    m = rows.shape[0]
    na = allowed.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)

    # a sample position per drawn row copy; order[a] lists positions sorted by
    # feature allowed[a] (stable, ties by row) and xs[a] the matching values
    mult = np.zeros(n, dtype=np.int64)
    for i in range(m):
        mult[rows[i]] += 1
    first = np.empty(n, dtype=np.int64)
    acc = 0
    for r in range(n):
        first[r] = acc
        acc += mult[r]
    ypos = np.empty(m)
    for r in range(n):
        for k in range(mult[r]):
            ypos[first[r] + k] = y[r]
    order = np.empty((na, m), dtype=np.int64)
    xs = np.empty((na, m))
    for a in range(na):
        f = allowed[a]
        q = 0
        for t in range(n):
            r = sorted_rows[f, t]
            for k in range(mult[r]):
                order[a, q] = first[r] + k
                xs[a, q] = X[r, f]
                q += 1

    flag = np.zeros(m, dtype=np.bool_)
    tmp = np.empty(m, dtype=np.int64)
    tmpx = np.empty(m)
    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        cnt = end - start
        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for q in range(start, end):
            v = ypos[order[0, q]] if na > 0 else 0.0
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        if na == 0:
            total = 0.0
            for pos in range(m):
                total += ypos[pos]
        value[node] = total / cnt
        cover[node] = cnt
        if depth >= max_depth or cnt < min_split or cnt < 2 * min_leaf or ymin == ymax or na == 0:
            continue

        cand = sample_without_replacement(state, na, min(n_try, na))
        cand.sort()
        best_score = -np.inf
        best_a = -1
        best_thr = 0.0
        for ci in range(cand.shape[0]):
            a = cand[ci]
            xlo = xs[a, start]
            xhi = xs[a, end - 1]
            if xlo == xhi:
                continue
            if random_thresholds:
                thr = xlo + _uniform(state) * (xhi - xlo)
                if thr >= xhi:
                    thr = xlo
                sl = 0.0
                nl = 0
                for q in range(start, end):
                    if xs[a, q] <= thr:
                        sl += ypos[order[a, q]]
                        nl += 1
                    else:
                        break
                nr = cnt - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sr = total - sl
                score = sl * sl / nl + sr * sr / nr
                if score > best_score:
                    best_score = score
                    best_a = a
                    best_thr = thr
            else:
                sl = 0.0
                for q in range(start, end - 1):
                    sl += ypos[order[a, q]]
                    nl = q - start + 1
                    nr = cnt - nl
                    if nr < min_leaf:
                        break
                    if nl < min_leaf:
                        continue
                    x0 = xs[a, q]
                    x1 = xs[a, q + 1]
                    if x0 == x1:
                        continue
                    sr = total - sl
                    score = sl * sl / nl + sr * sr / nr
                    if score > best_score:
                        best_score = score
                        best_a = a
                        thr = 0.5 * (x0 + x1)
                        if thr >= x1:
                            thr = x0
                        best_thr = thr
        if best_a < 0:
            continue

        nl = 0
        for q in range(start, end):
            goes = xs[best_a, q] <= best_thr
            flag[order[best_a, q]] = goes
            if goes:
                nl += 1
        for a in range(na):
            li = start
            ri = start + nl
            for q in range(start, end):
                pos = order[a, q]
                if flag[pos]:
                    tmp[li] = pos
                    tmpx[li] = xs[a, q]
                    li += 1
                else:
                    tmp[ri] = pos
                    tmpx[ri] = xs[a, q]
                    ri += 1
            for q in range(start, end):
                order[a, q] = tmp[q]
                xs[a, q] = tmpx[q]

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        feature[node] = allowed[best_a]
        threshold[node] = best_thr
        left[node] = lchild
        right[node] = rchild
        stack[top, 0] = rchild
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lchild
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), cover[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def predict_trees(feature, threshold, left, right, value, roots, X):
    """Per-tree predictions, shape (n_rows, n_trees); child indices are global."""
    n = X.shape[0]
    out = np.empty((n, roots.shape[0]))
    for t in range(roots.shape[0]):
        for i in range(n):
            node = roots[t]
            while feature[node] != LEAF:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i, t] = value[node]
    return out


@numba.njit(cache=True, nogil=True)
def predict_sum(feature, threshold, left, right, value, roots, X):
    n = X.shape[0]
    out = np.zeros(n)
    for t in range(roots.shape[0]):
        for i in range(n):
            node = roots[t]
            while feature[node] != LEAF:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] += value[node]
    return out
