"""Independent reference implementations used to check the library.

None of these import the code they check.
"""

import math

import numpy as np


def cosine_distance(x, y):
    nx, ny = math.sqrt(float(np.dot(x, x))), math.sqrt(float(np.dot(y, y)))
    if nx == 0 and ny == 0:
        return 0.0
    if nx == 0 or ny == 0:
        return 1.0
    return 1.0 - float(np.dot(x, y)) / (nx * ny)


def monotone_paths(ta, tb):
    """Every path from (0, 0) to (ta-1, tb-1) with unit steps right/down/diagonal."""
    def walk(i, j):
        if (i, j) == (ta - 1, tb - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            ni, nj = i + di, j + dj
            if ni < ta and nj < tb:
                for rest in walk(ni, nj):
                    yield [(i, j)] + rest
    return walk(0, 0)


def brute_force_dtw(a, b):
    """Normalized cost of the minimum-sum path (shortest among equal sums)."""
    best = None
    for path in monotone_paths(len(a), len(b)):
        total = 0.0
        for i, j in path:
            total += cosine_distance(a[i], b[j])
        key = (total, len(path))
        if best is None or key < best[0]:
            best = (key, path)
    (total, n), path = best
    return total / n, path


def rank_based_ap(costs, categories):
    """Average precision by walking pairs in ascending cost, tie groups at once.

    Precision counts SW-SP and SW-DP as hits; recall only SW-DP.
    """
    items = sorted(zip(costs, categories))
    n_swdp = sum(1 for c in categories if c == "SW-DP")
    ap = 0.0
    seen = hits = swdp = 0
    k = 0
    while k < len(items):
        group_end = k
        while group_end < len(items) and items[group_end][0] == items[k][0]:
            group_end += 1
        group = [c for _, c in items[k:group_end]]
        seen += len(group)
        hits += sum(1 for c in group if c != "DW")
        new_swdp = sum(1 for c in group if c == "SW-DP")
        swdp += new_swdp
        ap += (new_swdp / n_swdp) * (hits / seen)
        k = group_end
    return ap


def gmm_density_naive(weights, means, variances, x):
    """Mixture density evaluated directly in linear space."""
    total = 0.0
    for w, m, v in zip(weights, means, variances):
        norm = np.prod(1.0 / np.sqrt(2 * np.pi * v))
        total += w * norm * np.exp(-0.5 * np.sum((x - m) ** 2 / v))
    return total


def numeric_gradient(f, params, index, h=1e-5):
    """Central difference of scalar f() w.r.t. params[index] (modified in place)."""
    old = params[index]
    params[index] = old + h
    up = f()
    params[index] = old - h
    down = f()
    params[index] = old
    return (up - down) / (2 * h)
