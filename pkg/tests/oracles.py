"""Brute-force reference implementations used by the tests."""

from functools import lru_cache
from itertools import combinations

import numpy as np


@lru_cache(maxsize=None)
def all_monotone_paths(n: int, m: int) -> np.ndarray:
    """Every path (0,0) -> (n-1,m-1) with steps (1,0),(0,1),(1,1).

    Returned as flat cell indices padded with ``n*m`` (points at an extra zero cell).
    """
    paths = []

    def walk(i, j, acc):
        acc.append(i * m + j)
        if i == n - 1 and j == m - 1:
            paths.append(list(acc))
        else:
            if i + 1 < n and j + 1 < m:
                walk(i + 1, j + 1, acc)
            if i + 1 < n:
                walk(i + 1, j, acc)
            if j + 1 < m:
                walk(i, j + 1, acc)
        acc.pop()

    walk(0, 0, [])
    width = n + m - 1
    out = np.full((len(paths), width), n * m, dtype=np.int64)
    for k, p in enumerate(paths):
        out[k, : len(p)] = p
    return out


def brute_dtw_cost(cost: np.ndarray) -> float:
    n, m = cost.shape
    flat = np.append(np.asarray(cost, dtype=float).ravel(), 0.0)
    return float(flat[all_monotone_paths(n, m)].sum(axis=1).min())


def brute_match_cost(s_on, s_pitch, p_on, p_pitch, weight=1.0, pitch_cost=4.0, skip=2.0, discount=0.5):
    """Minimum over all order-preserving partial matchings of the two lists (given order)."""
    n, m = len(s_on), len(p_on)

    def pair(i, j):
        d = abs(int(s_pitch[i]) - int(p_pitch[j]))
        pc = 0.0 if d == 0 else (pitch_cost * discount if d in (7, 12) else pitch_cost)
        return weight * abs(s_on[i] - p_on[j]) + pc

    best = skip * (n + m)
    for k in range(1, min(n, m) + 1):
        for si in combinations(range(n), k):
            for pj in combinations(range(m), k):
                c = sum(pair(i, j) for i, j in zip(si, pj)) + skip * (n + m - 2 * k)
                best = min(best, c)
    return best


def agglomerative_single_linkage(values, threshold):
    """Naive agglomeration: repeatedly merge the two clusters whose closest
    members are nearest, while that distance is below ``threshold``."""
    clusters = [[i] for i in range(len(values))]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = min(abs(values[i] - values[j]) for i in clusters[a] for j in clusters[b])
                if best is None or d < best[0]:
                    best = (d, a, b)
        if best[0] >= threshold:
            break
        _, a, b = best
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    return sorted(sorted(c) for c in clusters)
