"""Non-dominated ranking (with constraint handling) and 2-D hypervolume."""

import numpy as np

from .._jit import ENABLED, jit


@jit
def _dominates(F, cv, a, b):
    """Constrained dominance: feasible beats infeasible, smaller violation beats larger."""
    if cv[a] > 0.0 or cv[b] > 0.0:
        return cv[a] < cv[b]
    better = False
    for k in range(F.shape[1]):
        if F[a, k] > F[b, k]:
            return False
        if F[a, k] < F[b, k]:
            better = True
    return better


@jit
def rank_loop(F, cv):
    """Front index per point (0 = non-dominated), by the fast non-dominated sort."""
    n = F.shape[0]
    dom_count = np.zeros(n, dtype=np.int64)
    dominated = np.zeros((n, n), dtype=np.bool_)
    for a in range(n):
        for b in range(a + 1, n):
            if _dominates(F, cv, a, b):
                dominated[a, b] = True
                dom_count[b] += 1
            elif _dominates(F, cv, b, a):
                dominated[b, a] = True
                dom_count[a] += 1
    rank = np.full(n, -1, dtype=np.int64)
    current = np.empty(n, dtype=np.int64)
    size = 0
    for a in range(n):
        if dom_count[a] == 0:
            current[size] = a
            size += 1
            rank[a] = 0
    r = 0
    nxt = np.empty(n, dtype=np.int64)
    while size > 0:
        nsize = 0
        for s in range(size):
            a = current[s]
            for b in range(n):
                if dominated[a, b]:
                    dom_count[b] -= 1
                    if dom_count[b] == 0:
                        rank[b] = r + 1
                        nxt[nsize] = b
                        nsize += 1
        r += 1
        for s in range(nsize):
            current[s] = nxt[s]
        size = nsize
    return rank


def rank_numpy(F, cv):
    n = F.shape[0]
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    pareto = le & lt
    infeas = (cv[:, None] > 0) | (cv[None, :] > 0)
    dom = np.where(infeas, cv[:, None] < cv[None, :], pareto)
    rank = np.full(n, -1, dtype=np.int64)
    remaining = np.ones(n, dtype=bool)
    r = 0
    while remaining.any():
        sub = dom[np.ix_(remaining, remaining)]
        front = ~sub.any(axis=0)
        idx = np.flatnonzero(remaining)[front]
        rank[idx] = r
        remaining[idx] = False
        r += 1
    return rank


rank = rank_loop if ENABLED else rank_numpy


def hypervolume_2d(F, ref):
    """Area dominated by the points of F (minimisation) and bounded by ``ref``."""
    F = np.asarray(F, dtype=float)
    if F.size == 0:
        return 0.0
    F = F[np.all(F < ref, axis=1)]
    if F.shape[0] == 0:
        return 0.0
    F = F[np.lexsort((F[:, 1], F[:, 0]))]
    hv = 0.0
    best_y = ref[1]
    for x, y in F:
        if y < best_y:
            hv += (ref[0] - x) * (best_y - y)
            best_y = y
    return float(hv)
