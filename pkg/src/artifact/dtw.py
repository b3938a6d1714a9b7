"""Dynamic time warping: exact DTW, FastDTW and DTW over precomputed costs.

All engines share one windowed dynamic-programming kernel. A window is a
per-row inclusive column interval ``[lo[i], hi[i]]``; cells are stored
row after row in flat arrays, so memory is proportional to the window
size and never to ``N * M`` unless the window is the full matrix.

Local steps are (1, 0), (0, 1) and (1, 1) with unit weights. Ties go to
the diagonal, then to (1, 0), then to (0, 1).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np

from .budget import Budget, ensure
from .errors import DimensionMismatch, EmptyMatrix, EmptySequence, NegativeCost, ValidationError
from .model import TimeMap, WarpingPath

# cells per kernel call between two budget checks
_CHUNK_CELLS = 1 << 21


class DistanceFunction(str, enum.Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"
    CANBERRA = "canberra"
    CHEBYSHEV = "chebyshev"
    BRAYCURTIS = "braycurtis"
    CORRELATION = "correlation"

    @classmethod
    def parse(cls, value) -> "DistanceFunction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(d.value for d in cls)
            raise ValidationError(f"unknown distance {value!r}; choose one of {names}") from None


_COSINE, _EUCLIDEAN, _MANHATTAN, _CANBERRA, _CHEBYSHEV, _BRAYCURTIS, _SEBA = range(7)
_CODES = {
    DistanceFunction.COSINE: _COSINE,
    DistanceFunction.EUCLIDEAN: _EUCLIDEAN,
    DistanceFunction.MANHATTAN: _MANHATTAN,
    DistanceFunction.CANBERRA: _CANBERRA,
    DistanceFunction.CHEBYSHEV: _CHEBYSHEV,
    DistanceFunction.BRAYCURTIS: _BRAYCURTIS,
    # correlation is cosine on row-centred vectors
    DistanceFunction.CORRELATION: _COSINE,
}


@dataclass(frozen=True)
class DtwResult:
    path: WarpingPath
    total_cost: float


# -- kernels ---------------------------------------------------------------

@numba.njit(cache=True)
def _cosine(x, y, nx, ny, start, stop):
    if nx == 0.0 and ny == 0.0:
        return 0.0
    if nx == 0.0 or ny == 0.0:
        return 1.0
    dot = 0.0
    for d in range(start, stop):
        dot += x[d] * y[d]
    v = 1.0 - dot / (nx * ny)
    return v if v > 0.0 else 0.0


@numba.njit(cache=True)
def _euclidean(x, y, start, stop):
    acc = 0.0
    for d in range(start, stop):
        diff = x[d] - y[d]
        acc += diff * diff
    return np.sqrt(acc)


@numba.njit(cache=True)
def _pair_cost(x, y, nx, ny, code, split):
    dim = x.shape[0]
    if code == 0:
        return _cosine(x, y, nx, ny, 0, dim)
    if code == 1:
        return _euclidean(x, y, 0, dim)
    if code == 2:
        acc = 0.0
        for d in range(dim):
            acc += abs(x[d] - y[d])
        return acc
    if code == 3:
        acc = 0.0
        for d in range(dim):
            den = abs(x[d]) + abs(y[d])
            if den > 0.0:
                acc += abs(x[d] - y[d]) / den
        return acc
    if code == 4:
        acc = 0.0
        for d in range(dim):
            v = abs(x[d] - y[d])
            if v > acc:
                acc = v
        return acc
    if code == 5:
        num = 0.0
        den = 0.0
        for d in range(dim):
            num += abs(x[d] - y[d])
            den += abs(x[d] + y[d])
        if den == 0.0:
            return 0.0 if num == 0.0 else 1.0
        return num / den
    # harmonic part: cosine over [0, split); onset part: euclidean over [split, dim)
    return _cosine(x, y, nx, ny, 0, split) + _euclidean(x, y, split, dim)


@numba.njit(cache=True)
def _window_costs(a, b, na, nb, lo, hi, offs, code, split, r0, r1, out):
    for i in range(r0, r1):
        base = offs[i] - lo[i]
        for j in range(lo[i], hi[i] + 1):
            out[base + j] = _pair_cost(a[i], b[j], na[i], nb[j], code, split)


@numba.njit(cache=True)
def _accumulate(cost, lo, hi, offs, r0, r1, acc, step):
    inf = np.inf
    for i in range(r0, r1):
        base = offs[i] - lo[i]
        for j in range(lo[i], hi[i] + 1):
            k = base + j
            c = cost[k]
            if i == 0 and j == 0:
                acc[k] = c
                step[k] = -1
                continue
            diag = inf
            up = inf
            left = inf
            if i > 0:
                plo = lo[i - 1]
                phi = hi[i - 1]
                pbase = offs[i - 1] - plo
                if j >= 1 and plo <= j - 1 <= phi:
                    diag = acc[pbase + j - 1]
                if plo <= j <= phi:
                    up = acc[pbase + j]
            if j - 1 >= lo[i]:
                left = acc[k - 1]
            if diag <= up and diag <= left:
                acc[k] = diag + c
                step[k] = 0
            elif up <= left:
                acc[k] = up + c
                step[k] = 1
            else:
                acc[k] = left + c
                step[k] = 2


@numba.njit(cache=True)
def _traceback(lo, offs, step, n, m):
    path = np.empty((n + m - 1, 2), dtype=np.int64)
    i = n - 1
    j = m - 1
    length = 0
    while True:
        path[length, 0] = i
        path[length, 1] = j
        length += 1
        if i == 0 and j == 0:
            break
        s = step[offs[i] + j - lo[i]]
        if s == 0:
            i -= 1
            j -= 1
        elif s == 1:
            i -= 1
        else:
            j -= 1
    return path[:length][::-1].copy()


# -- window plumbing -------------------------------------------------------

def _offsets(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    widths = hi - lo + 1
    offs = np.zeros(len(lo) + 1, dtype=np.int64)
    np.cumsum(widths, out=offs[1:])
    return offs


def _row_chunks(offs: np.ndarray):
    n = len(offs) - 1
    r0 = 0
    while r0 < n:
        target = offs[r0] + _CHUNK_CELLS
        r1 = int(np.searchsorted(offs, target, side="right")) - 1
        r1 = min(max(r1, r0 + 1), n)
        yield r0, r1
        r0 = r1


def _solve(cost_fill, lo, hi, n, m, budget: Budget, phase: str) -> DtwResult:
    """Run the DP over a window; ``cost_fill(r0, r1, out)`` writes cell costs."""
    offs = _offsets(lo, hi)
    total = int(offs[-1])
    budget.reserve(total * (8 + 8 + 1), phase)
    cost = np.empty(total, dtype=np.float64)
    acc = np.empty(total, dtype=np.float64)
    step = np.empty(total, dtype=np.int8)
    for r0, r1 in _row_chunks(offs):
        budget.check(phase)
        cost_fill(r0, r1, cost, offs)
        _accumulate(cost, lo, hi, offs, r0, r1, acc, step)
    end = int(offs[n - 1] + (m - 1) - lo[n - 1])
    total_cost = float(acc[end])
    if not np.isfinite(total_cost):
        raise ValidationError("window does not connect (0, 0) to the end cell")
    path = _traceback(lo, offs, step, n, m)
    return DtwResult(WarpingPath(path), total_cost)


def _full_window(n: int, m: int):
    return np.zeros(n, dtype=np.int64), np.full(n, m - 1, dtype=np.int64)


# -- feature preparation ---------------------------------------------------

def _as_sequence(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a sequence of vectors")
    if arr.shape[0] == 0:
        raise EmptySequence(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def _prepare(a, b, dist, split: int | None = None):
    a = _as_sequence(a, "first sequence")
    b = _as_sequence(b, "second sequence")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"vector dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    if split is not None:
        na = np.linalg.norm(a[:, :split], axis=1)
        nb = np.linalg.norm(b[:, :split], axis=1)
        return a, b, na, nb, _SEBA, split
    dist = DistanceFunction.parse(dist)
    if dist is DistanceFunction.CORRELATION:
        a = np.ascontiguousarray(a - a.mean(axis=1, keepdims=True))
        b = np.ascontiguousarray(b - b.mean(axis=1, keepdims=True))
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    return a, b, na, nb, _CODES[dist], 0


def _feature_filler(a, b, na, nb, lo, hi, code, split):
    def fill(r0, r1, out, offs):
        _window_costs(a, b, na, nb, lo, hi, offs, code, split, r0, r1, out)
    return fill


def _dtw_features(a, b, na, nb, code, split, lo, hi, budget, phase):
    fill = _feature_filler(a, b, na, nb, lo, hi, code, split)
    return _solve(fill, lo, hi, len(a), len(b), budget, phase)


def distance_matrix(a, b, dist=DistanceFunction.COSINE) -> np.ndarray:
    """Full N x M matrix of pairwise distances."""
    a, b, na, nb, code, split = _prepare(a, b, dist)
    return _matrix(a, b, na, nb, code, split)


def _matrix(a, b, na, nb, code, split) -> np.ndarray:
    n, m = len(a), len(b)
    lo, hi = _full_window(n, m)
    offs = _offsets(lo, hi)
    out = np.empty(n * m, dtype=np.float64)
    _window_costs(a, b, na, nb, lo, hi, offs, code, split, 0, n, out)
    return out.reshape(n, m)


def pair_distance(x, y, dist=DistanceFunction.COSINE) -> float:
    return float(distance_matrix(np.atleast_2d(x), np.atleast_2d(y), dist)[0, 0])


# -- public engines --------------------------------------------------------

def dtw_full(a, b, dist=DistanceFunction.EUCLIDEAN, budget: Budget | None = None) -> DtwResult:
    """Exact DTW between two vector sequences (1-D input = scalar features)."""
    a, b, na, nb, code, split = _prepare(a, b, dist)
    lo, hi = _full_window(len(a), len(b))
    return _dtw_features(a, b, na, nb, code, split, lo, hi, ensure(budget), "dtw")


def dtw_on_matrix(cost, budget: Budget | None = None) -> DtwResult:
    """Exact DTW over precomputed non-negative cell costs."""
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.size == 0:
        raise EmptyMatrix("cost matrix must be a non-empty 2-D array")
    if not np.isfinite(c).all():
        raise ValidationError("cost matrix contains non-finite values")
    if (c < 0).any():
        raise NegativeCost("cost matrix contains negative entries")
    n, m = c.shape
    flat = np.ascontiguousarray(c).ravel()
    lo, hi = _full_window(n, m)

    def fill(r0, r1, out, offs):
        out[offs[r0]:offs[r1]] = flat[r0 * m:r1 * m]

    return _solve(fill, lo, hi, n, m, ensure(budget), "dtw")


def reduce_by_half(x: np.ndarray) -> np.ndarray:
    """Average consecutive pairs; an odd trailing element is dropped."""
    even = len(x) - len(x) % 2
    return 0.5 * (x[0:even:2] + x[1:even:2])


def expand_window(coarse_path: np.ndarray, n: int, m: int, radius: int):
    """Project a coarse path onto the fine grid and widen it by ``radius``.

    Every coarse cell within ``radius`` (in both directions) of the path
    is kept and expanded into its 2 x 2 block of fine cells. Returns the
    per-row inclusive column bounds for the fine grid.
    """
    ci, cj = coarse_path[:, 0], coarse_path[:, 1]
    cn = int(ci[-1]) + 1
    min_j = np.full(cn, np.iinfo(np.int64).max, dtype=np.int64)
    max_j = np.full(cn, -1, dtype=np.int64)
    np.minimum.at(min_j, ci, cj)
    np.maximum.at(max_j, ci, cj)
    rows = np.arange((n + 1) // 2)
    low = np.clip(rows - radius, 0, cn - 1)
    high = np.clip(rows + radius, 0, cn - 1)
    c_lo = min_j[low] - radius
    c_hi = max_j[high] + radius
    fine_rows = np.arange(n)
    lo = np.clip(2 * c_lo[fine_rows // 2], 0, m - 1)
    hi = np.clip(2 * c_hi[fine_rows // 2] + 1, 0, m - 1)
    return lo.astype(np.int64), hi.astype(np.int64)


def _fastdtw(a, b, na, nb, code, split, radius, budget, level=0) -> DtwResult:
    min_size = max(radius + 2, 10)
    if len(a) <= min_size or len(b) <= min_size:
        lo, hi = _full_window(len(a), len(b))
        return _dtw_features(a, b, na, nb, code, split, lo, hi, budget, "fastdtw")
    budget.check("fastdtw")
    ca, cb = reduce_by_half(a), reduce_by_half(b)
    cna, cnb = _norms(ca, code, split), _norms(cb, code, split)
    coarse = _fastdtw(ca, cb, cna, cnb, code, split, radius, budget, level + 1)
    lo, hi = expand_window(coarse.path.pairs, len(a), len(b), radius)
    return _dtw_features(a, b, na, nb, code, split, lo, hi, budget, "fastdtw")


def _norms(x, code, split):
    if code == _SEBA:
        return np.linalg.norm(x[:, :split], axis=1)
    return np.linalg.norm(x, axis=1)


def fastdtw(a, b, dist=DistanceFunction.COSINE, radius: int = 178, budget: Budget | None = None) -> DtwResult:
    """Multilevel approximate DTW restricted to a corridor of ``radius`` cells.

    Sequences are halved by pairwise averaging until one of them is no
    longer than ``max(radius + 2, 10)``; that level is solved exactly and
    each finer level is solved inside the widened projection of the coarser
    path. The returned cost is the corridor optimum.
    """
    if int(radius) != radius or radius < 1:
        raise ValidationError(f"radius must be a positive integer, got {radius}")
    a, b, na, nb, code, split = _prepare(a, b, dist)
    return _fastdtw(a, b, na, nb, code, split, int(radius), ensure(budget))


def fastdtw_split(a, b, split: int, radius: int, budget: Budget | None = None) -> DtwResult:
    """FastDTW with cost = cosine over the first ``split`` dims + euclidean over the rest."""
    a, b, na, nb, code, split = _prepare(a, b, None, split=split)
    return _fastdtw(a, b, na, nb, code, split, int(radius), ensure(budget))


def split_distance_matrix(a, b, split: int) -> np.ndarray:
    a, b, na, nb, code, split = _prepare(a, b, None, split=split)
    return _matrix(a, b, na, nb, code, split)


def path_cost(cost: np.ndarray, path: WarpingPath) -> float:
    return float(np.asarray(cost)[path.pairs[:, 0], path.pairs[:, 1]].sum())


def path_to_time_map(path: WarpingPath, frame_period_a: float, frame_period_b: float) -> TimeMap:
    """Anchors ``(i * period_a, mean(j) * period_b)`` for every distinct row ``i``."""
    ia = path.pairs[:, 0]
    ib = path.pairs[:, 1].astype(float)
    counts = np.bincount(ia)
    sums = np.bincount(ia, weights=ib)
    rows = np.flatnonzero(counts)
    mean_b = sums[rows] / counts[rows]
    return TimeMap(np.column_stack([rows * float(frame_period_a), mean_b * float(frame_period_b)]))
