"""Compiled path-dependent TreeSHAP.

Implements the polynomial-time recursion over decision paths with
cover-weighted (path-dependent) conditional expectations, including the
conditioning switch used for pairwise interaction values. Trees use the
``x <= threshold`` goes-left convention and global child indices.
"""

from __future__ import annotations

import numba
import numpy as np


# The path buffers are flat arrays; every helper works on the path stored
# from offset ``o`` so the walker never creates array views.


@numba.njit(cache=True, nogil=True, inline="always")
def extend_path(feat, zero, one, pw, o, depth, zero_fraction, one_fraction, feature_index):
    feat[o + depth] = feature_index
    zero[o + depth] = zero_fraction
    one[o + depth] = one_fraction
    pw[o + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[o + i + 1] += one_fraction * pw[o + i] * (i + 1) / (depth + 1)
        pw[o + i] = zero_fraction * pw[o + i] * (depth - i) / (depth + 1)


@numba.njit(cache=True, nogil=True, inline="always")
def unwind_path(feat, zero, one, pw, o, depth, path_index):
    one_fraction = one[o + path_index]
    zero_fraction = zero[o + path_index]
    next_one = pw[o + depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[o + i]
            pw[o + i] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - pw[o + i] * zero_fraction * (depth - i) / (depth + 1)
        else:
            pw[o + i] = pw[o + i] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(path_index, depth):
        feat[o + i] = feat[o + i + 1]
        zero[o + i] = zero[o + i + 1]
        one[o + i] = one[o + i + 1]


@numba.njit(cache=True, nogil=True, inline="always")
def unwound_path_sum(feat, zero, one, pw, o, depth, path_index):
    one_fraction = one[o + path_index]
    zero_fraction = zero[o + path_index]
    next_one = pw[o + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = next_one * (depth + 1) / ((i + 1) * one_fraction)
            total += tmp
            next_one = pw[o + i] - tmp * zero_fraction * ((depth - i) / (depth + 1))
        elif zero_fraction != 0.0:
            total += (pw[o + i] / zero_fraction) / ((depth - i) / (depth + 1))
    return total


@numba.njit(cache=True, nogil=True)
def tree_walk(feature, threshold, left, right, value, cover, x, phi, root,
              feat, zero, one, pw, stack_i, stack_f, condition, condition_feature):
    """Attributions of one tree for one row, accumulated into ``phi``.

    The recursion over nodes runs on an explicit stack. Each frame keeps its
    path at offset ``o`` in the buffers; a child's path starts right after
    its parent's, so the parent's path survives the hot subtree and is still
    there when the cold child copies it.
    """
    # stack_i columns: node, parent's path offset, path depth, parent feature
    # stack_f columns: parent zero fraction, parent one fraction, condition fraction
    top = 0
    stack_i[0, 0] = root
    stack_i[0, 1] = 0
    stack_i[0, 2] = 0
    stack_i[0, 3] = -1
    stack_f[0, 0] = 1.0
    stack_f[0, 1] = 1.0
    stack_f[0, 2] = 1.0
    while top >= 0:
        node = stack_i[top, 0]
        src = stack_i[top, 1]
        depth = stack_i[top, 2]
        parent_feature = stack_i[top, 3]
        parent_zero = stack_f[top, 0]
        parent_one = stack_f[top, 1]
        condition_fraction = stack_f[top, 2]
        top -= 1
        if condition_fraction == 0.0:
            continue
        o = src + depth + 1
        for i in range(depth + 1):
            feat[o + i] = feat[src + i]
            zero[o + i] = zero[src + i]
            one[o + i] = one[src + i]
            pw[o + i] = pw[src + i]
        if condition == 0 or condition_feature != parent_feature:
            extend_path(feat, zero, one, pw, o, depth, parent_zero, parent_one, parent_feature)

        split = feature[node]
        if split < 0:
            for i in range(1, depth + 1):
                w = unwound_path_sum(feat, zero, one, pw, o, depth, i)
                phi[feat[o + i]] += w * (one[o + i] - zero[o + i]) * value[node] * condition_fraction
            continue

        l = left[node]
        r = right[node]
        if x[split] <= threshold[node]:
            hot, cold = l, r
        else:
            hot, cold = r, l
        hot_zero = cover[hot] / cover[node]
        cold_zero = cover[cold] / cover[node]
        incoming_zero = 1.0
        incoming_one = 1.0

        path_index = 0
        while path_index <= depth:
            if feat[o + path_index] == split:
                break
            path_index += 1
        if path_index != depth + 1:
            incoming_zero = zero[o + path_index]
            incoming_one = one[o + path_index]
            unwind_path(feat, zero, one, pw, o, depth, path_index)
            depth -= 1

        hot_cf = condition_fraction
        cold_cf = condition_fraction
        if condition > 0 and split == condition_feature:
            cold_cf = 0.0
            depth -= 1
        elif condition < 0 and split == condition_feature:
            hot_cf *= hot_zero
            cold_cf *= cold_zero
            depth -= 1

        # the hot child is popped first, matching the recursive visiting order
        top += 1
        stack_i[top, 0] = cold
        stack_i[top, 1] = o
        stack_i[top, 2] = depth + 1
        stack_i[top, 3] = split
        stack_f[top, 0] = cold_zero * incoming_zero
        stack_f[top, 1] = 0.0
        stack_f[top, 2] = cold_cf
        top += 1
        stack_i[top, 0] = hot
        stack_i[top, 1] = o
        stack_i[top, 2] = depth + 1
        stack_i[top, 3] = split
        stack_f[top, 0] = hot_zero * incoming_zero
        stack_f[top, 1] = incoming_one
        stack_f[top, 2] = hot_cf


@numba.njit(cache=True, nogil=True)
def _expectation(left, right, value, cover, node):
    if left[node] < 0:
        return value[node]
    l = left[node]
    r = right[node]
    return (cover[l] * _expectation(left, right, value, cover, l)
            + cover[r] * _expectation(left, right, value, cover, r)) / cover[node]


@numba.njit(cache=True, nogil=True)
def _depth(left, right, node):
    if left[node] < 0:
        return 0
    a = _depth(left, right, left[node])
    b = _depth(left, right, right[node])
    return 1 + (a if a > b else b)


@numba.njit(cache=True, nogil=True)
def tree_expectations(left, right, value, cover, roots):
    out = np.empty(roots.shape[0])
    for t in range(roots.shape[0]):
        out[t] = _expectation(left, right, value, cover, roots[t])
    return out


@numba.njit(cache=True, nogil=True)
def ensemble_shap(feature, threshold, left, right, value, cover, roots, X, condition, condition_feature):
    """Summed per-tree attributions, shape (n_rows, n_features).

    ``condition`` 0 gives Shapley values; +1 / -1 fix ``condition_feature``
    as present / absent for the interaction decomposition.
    """
    n, M = X.shape
    out = np.zeros((n, M))
    max_d = 0
    for t in range(roots.shape[0]):
        d = _depth(left, right, roots[t])
        if d > max_d:
            max_d = d
    size = (max_d + 2) * (max_d + 3) // 2 + 2
    feat = np.zeros(size, dtype=np.int64)
    zero = np.zeros(size)
    one = np.zeros(size)
    pw = np.zeros(size)
    stack_i = np.zeros((max_d + 3, 4), dtype=np.int64)
    stack_f = np.zeros((max_d + 3, 3))
    phi = np.zeros(M)
    for i in range(n):
        x = X[i]
        for j in range(M):
            phi[j] = 0.0
        for t in range(roots.shape[0]):
            tree_walk(feature, threshold, left, right, value, cover, x, phi, roots[t],
                      feat, zero, one, pw, stack_i, stack_f, condition, condition_feature)
        for j in range(M):
            out[i, j] = phi[j]
    return out


@numba.njit(cache=True, nogil=True)
def ensemble_interactions(feature, threshold, left, right, value, cover, roots, X, used):
    """Per-row pairwise interaction sums over trees, shape (n_rows, M, M).

    Off-diagonals hold half the on/off conditional difference, averaged
    with the transpose; diagonals take the remainder of the Shapley value.
    Features not in ``used`` are skipped (their rows and columns are zero).
    """
    n, M = X.shape
    out = np.zeros((n, M, M))
    max_d = 0
    for t in range(roots.shape[0]):
        d = _depth(left, right, roots[t])
        if d > max_d:
            max_d = d
    size = (max_d + 2) * (max_d + 3) // 2 + 2
    feat = np.zeros(size, dtype=np.int64)
    zero = np.zeros(size)
    one = np.zeros(size)
    pw = np.zeros(size)
    stack_i = np.zeros((max_d + 3, 4), dtype=np.int64)
    stack_f = np.zeros((max_d + 3, 3))
    phi = np.zeros(M)
    on = np.zeros(M)
    off = np.zeros(M)
    for i in range(n):
        x = X[i]
        phi[:] = 0.0
        for t in range(roots.shape[0]):
            tree_walk(feature, threshold, left, right, value, cover, x, phi, roots[t],
                      feat, zero, one, pw, stack_i, stack_f, 0, 0)
        for j in range(M):
            if not used[j]:
                continue
            on[:] = 0.0
            off[:] = 0.0
            for t in range(roots.shape[0]):
                tree_walk(feature, threshold, left, right, value, cover, x, on, roots[t],
                          feat, zero, one, pw, stack_i, stack_f, 1, j)
                tree_walk(feature, threshold, left, right, value, cover, x, off, roots[t],
                          feat, zero, one, pw, stack_i, stack_f, -1, j)
            for k in range(M):
                if k != j:
                    out[i, j, k] = 0.5 * (on[k] - off[k])
        for j in range(M):
            for k in range(j + 1, M):
                s = 0.5 * (out[i, j, k] + out[i, k, j])
                out[i, j, k] = s
                out[i, k, j] = s
        for j in range(M):
            rest = 0.0
            for k in range(M):
                if k != j:
                    rest += out[i, j, k]
            out[i, j, j] = phi[j] - rest
    return out
