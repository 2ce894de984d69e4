"""Compiled CART kernels (binary Gini trees with sample weights)."""

import numpy as np
from numba import njit

LEAF = -1
# nodes holding more than 1/SCAN_RATIO of the rows filter the presorted order
# instead of sorting their own values
SCAN_RATIO = 8


@njit(cache=True)
def build_tree(XT, order, y, w, mult, max_depth, min_leaf, max_features, seed):
    """Grow one tree.

    XT is feature-major (d, n); ``order[f]`` lists all rows sorted by feature
    f. ``mult[r]`` is how many times row r is in the training sample (0 = out,
    >1 for bootstrap repeats); a row counts ``mult`` times toward min_leaf and
    with weight ``w[r] * mult[r]``.

    max_depth < 0 means unlimited. Splits send ``x <= threshold`` left at the
    midpoint between neighbouring distinct values. When max_features < d,
    features are visited in a seeded random order until ``max_features``
    non-constant ones have been evaluated. Equal scores keep the lower feature
    index, then the lower threshold.

    Returns (feature, threshold, left, right, value, weight, impurity, count)
    arrays trimmed to the node count; ``value`` is the weighted fraction of
    class 1 and ``weight`` the node's share of the total training weight.
    """
    d, n = XT.shape
    n_in = 0
    for r in range(n):
        if mult[r] > 0:
            n_in += 1
    cap = 2 * n_in + 1
    feature = np.full(cap, LEAF, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, np.int64)
    right = np.full(cap, LEAF, np.int64)
    value = np.zeros(cap)
    weight = np.zeros(cap)
    impurity = np.zeros(cap)
    count = np.zeros(cap, np.int64)

    np.random.seed(seed)
    buf = np.empty(n_in, np.int64)
    owner = np.full(n, -1, np.int64)
    wt = np.zeros(n)
    k = 0
    total_w = 0.0
    for r in range(n):
        if mult[r] > 0:
            buf[k] = r
            owner[r] = 0
            wt[r] = w[r] * mult[r]
            total_w += wt[r]
            k += 1
    tmp = np.empty(n_in, np.int64)
    vals = np.empty(n_in)
    srt = np.empty(n_in, np.int64)

    stack = np.empty((cap, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_in
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        w0 = 0.0
        w1 = 0.0
        cnt = 0
        for k in range(start, end):
            r = buf[k]
            cnt += mult[r]
            if y[r] == 1:
                w1 += wt[r]
            else:
                w0 += wt[r]
        W = w0 + w1
        count[node] = cnt
        weight[node] = W / total_w
        value[node] = w1 / W if W > 0 else 0.5
        impurity[node] = 1.0 - (w0 * w0 + w1 * w1) / (W * W) if W > 0 else 0.0

        if w0 == 0.0 or w1 == 0.0:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if cnt < 2 * min_leaf:
            continue

        if max_features < d:
            fo = np.random.permutation(d)
        else:
            fo = np.arange(d)
        scan = m * SCAN_RATIO > n

        best_score = -1.0
        best_f = -1
        best_t = 0.0
        evaluated = 0
        for oi in range(d):
            if evaluated >= max_features:
                break
            f = fo[oi]
            if scan:
                j = 0
                for q in range(n):
                    r = order[f, q]
                    if owner[r] == node:
                        srt[j] = r
                        j += 1
            else:
                for k in range(m):
                    vals[k] = XT[f, buf[start + k]]
                idx = np.argsort(vals[:m], kind="quicksort")
                for k in range(m):
                    srt[k] = buf[start + idx[k]]
            if XT[f, srt[0]] == XT[f, srt[m - 1]]:
                continue
            evaluated += 1
            l0 = 0.0
            l1 = 0.0
            lc = 0
            for k in range(m - 1):
                r = srt[k]
                lc += mult[r]
                if y[r] == 1:
                    l1 += wt[r]
                else:
                    l0 += wt[r]
                a = XT[f, r]
                b = XT[f, srt[k + 1]]
                if b <= a:
                    continue
                if lc < min_leaf or cnt - lc < min_leaf:
                    continue
                lw = l0 + l1
                r0 = w0 - l0
                r1 = w1 - l1
                rw = r0 + r1
                if lw <= 0.0 or rw <= 0.0:
                    continue
                score = (l0 * l0 + l1 * l1) / lw + (r0 * r0 + r1 * r1) / rw
                if score > best_score or (score == best_score and f < best_f):
                    best_score = score
                    best_f = f
                    t = 0.5 * (a + b)
                    if t >= b:
                        t = a
                    best_t = t

        if best_f < 0:
            continue

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        nl = 0
        nr = 0
        for k in range(start, end):
            r = buf[k]
            if XT[best_f, r] <= best_t:
                buf[start + nl] = r
                owner[r] = lid
                nl += 1
            else:
                tmp[nr] = r
                owner[r] = rid
                nr += 1
        for k in range(nr):
            buf[start + nl + k] = tmp[k]

        feature[node] = best_f
        threshold[node] = best_t
        left[node] = lid
        right[node] = rid
        stack[top, 0] = rid
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        weight[:n_nodes].copy(),
        impurity[:n_nodes].copy(),
        count[:n_nodes].copy(),
    )


@njit(cache=True)
def apply_tree(X, feature, threshold, left, right, value):
    """Class-1 fraction of the leaf each row of X lands in."""
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while left[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
