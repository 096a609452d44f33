"""
Dynamic time warping with a cosine local distance.

The cost of an alignment is the sum of frame distances along the path
divided by the number of path steps. Among paths of equal summed distance
the shorter one wins, so the cost-only and with-path variants always agree.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ZrkitError

# backpointer codes
_DIAG, _UP, _LEFT = 0, 1, 2


@dataclass
class DtwResult:
    normalized_cost: float
    path: list = None       # [(i, j), ...] from (0, 0) to (T_a-1, T_b-1)
    path_length: int = 0


def _as_matrix(x):
    frames = getattr(x, "frames", x)
    return np.ascontiguousarray(frames, dtype=np.float64)


def frame_distance(x, y):
    """Cosine distance ``1 - cos(x, y)`` in [0, 2].

    One all-zero vector gives 1, two give 0.
    """
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ZrkitError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return _cosine(x, y)


@numba.njit(cache=True, nogil=True)
def _cosine(x, y):
    ab = 0.0
    aa = 0.0
    bb = 0.0
    for k in range(x.shape[0]):
        ab += x[k] * y[k]
        aa += x[k] * x[k]
        bb += y[k] * y[k]
    if aa == 0.0 and bb == 0.0:
        return 0.0
    if aa == 0.0 or bb == 0.0:
        return 1.0
    d = 1.0 - ab / math.sqrt(aa * bb)
    if d < 0.0:
        return 0.0
    if d > 2.0:
        return 2.0
    return d


@numba.njit(cache=True, nogil=True)
def _better(c1, l1, c2, l2):
    return c1 < c2 or (c1 == c2 and l1 < l2)


@numba.njit(cache=True, nogil=True)
def _dtw_cost(a, b, radius):
    """Two-row DP; returns (summed cost, path length). Cells outside the band
    ``|i - j| <= radius`` are unreachable."""
    ta, tb = a.shape[0], b.shape[0]
    inf = np.inf
    prev_c = np.full(tb, inf)
    prev_l = np.zeros(tb, dtype=np.int64)
    cur_c = np.full(tb, inf)
    cur_l = np.zeros(tb, dtype=np.int64)
    for i in range(ta):
        lo = max(0, i - radius)
        hi = min(tb - 1, i + radius)
        for j in range(tb):
            cur_c[j] = inf
            cur_l[j] = 0
        for j in range(lo, hi + 1):
            d = _cosine(a[i], b[j])
            if i == 0 and j == 0:
                cur_c[j] = d
                cur_l[j] = 1
                continue
            bc = inf
            bl = 0
            if i > 0 and j > 0 and prev_c[j - 1] < inf:
                bc = prev_c[j - 1]
                bl = prev_l[j - 1]
            if i > 0 and prev_c[j] < inf and _better(prev_c[j], prev_l[j], bc, bl):
                bc = prev_c[j]
                bl = prev_l[j]
            if j > 0 and cur_c[j - 1] < inf and _better(cur_c[j - 1], cur_l[j - 1], bc, bl):
                bc = cur_c[j - 1]
                bl = cur_l[j - 1]
            if bc < inf:
                cur_c[j] = bc + d
                cur_l[j] = bl + 1
        tmp_c = prev_c
        prev_c = cur_c
        cur_c = tmp_c
        tmp_l = prev_l
        prev_l = cur_l
        cur_l = tmp_l
    return prev_c[tb - 1], prev_l[tb - 1]


@numba.njit(cache=True, nogil=True)
def _dtw_path(a, b):
    ta, tb = a.shape[0], b.shape[0]
    acc = np.empty((ta, tb))
    length = np.zeros((ta, tb), dtype=np.int64)
    back = np.zeros((ta, tb), dtype=np.int8)
    for i in range(ta):
        for j in range(tb):
            d = _cosine(a[i], b[j])
            if i == 0 and j == 0:
                acc[i, j] = d
                length[i, j] = 1
                continue
            bc = np.inf
            bl = 0
            code = _DIAG
            if i > 0 and j > 0:
                bc = acc[i - 1, j - 1]
                bl = length[i - 1, j - 1]
            if i > 0 and _better(acc[i - 1, j], length[i - 1, j], bc, bl):
                bc = acc[i - 1, j]
                bl = length[i - 1, j]
                code = _UP
            if j > 0 and _better(acc[i, j - 1], length[i, j - 1], bc, bl):
                bc = acc[i, j - 1]
                bl = length[i, j - 1]
                code = _LEFT
            acc[i, j] = bc + d
            length[i, j] = bl + 1
            back[i, j] = code
    n = length[ta - 1, tb - 1]
    path = np.empty((n, 2), dtype=np.int64)
    i, j = ta - 1, tb - 1
    for k in range(n - 1, -1, -1):
        path[k, 0] = i
        path[k, 1] = j
        code = back[i, j]
        if code == _DIAG:
            i -= 1
            j -= 1
        elif code == _UP:
            i -= 1
        else:
            j -= 1
    return acc[ta - 1, tb - 1], n, path


def _check_pair(a, b):
    if a.shape[0] < 1 or b.shape[0] < 1:
        raise ZrkitError("DTW needs at least one frame on each side")
    if a.shape[1] != b.shape[1]:
        raise ZrkitError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")


def dtw(a, b, with_path=False):
    """Align two T x D sequences (arrays or FeatureSequences).

    Steps are (1, 0), (0, 1) and (1, 1). On ties the backtrace prefers the
    diagonal predecessor, then ``(i - 1, j)``.
    """
    a, b = _as_matrix(a), _as_matrix(b)
    _check_pair(a, b)
    if with_path:
        total, n, steps = _dtw_path(a, b)
        path = [(int(i), int(j)) for i, j in steps]
        return DtwResult(float(total) / n, path, int(n))
    total, n = _dtw_cost(a, b, max(a.shape[0], b.shape[0]))
    return DtwResult(float(total) / n, None, int(n))


def dtw_cost(a, b):
    """Normalized DTW cost only (two-row memory)."""
    return dtw(a, b).normalized_cost


def band_radius(ta, tb, band_fraction):
    return max(math.ceil(band_fraction * max(ta, tb)), abs(ta - tb))


def dtw_cost_banded(a, b, band_fraction):
    """Normalized DTW cost inside a Sakoe-Chiba band.

    Returns ``math.inf`` when no path fits in the band.
    """
    if not 0 < band_fraction <= 1:
        raise ZrkitError(f"band_fraction must lie in (0, 1], got {band_fraction}")
    a, b = _as_matrix(a), _as_matrix(b)
    _check_pair(a, b)
    total, n = _dtw_cost(a, b, band_radius(a.shape[0], b.shape[0], band_fraction))
    if not math.isfinite(total):
        return math.inf
    return float(total) / n
