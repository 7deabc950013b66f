"""Pareto utilities: fronts, crowding distance and the hypervolume indicator."""

from __future__ import annotations

import numpy as np

from ..kernels import pareto as _k

SENTINEL = np.inf


def _as_matrix(points) -> np.ndarray:
    F = np.asarray(points, dtype=float)
    if F.ndim == 1:
        F = F.reshape(-1, 1) if F.size else F.reshape(0, 1)
    return np.ascontiguousarray(F)


def ranks(points, violations=None) -> np.ndarray:
    F = _as_matrix(points)
    cv = np.zeros(F.shape[0]) if violations is None else np.asarray(violations, dtype=float).reshape(-1)
    if F.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.asarray(_k.rank(F, np.ascontiguousarray(cv)))


def non_dominated_sort(points, violations=None) -> list[list[int]]:
    """Fronts of indices, front 0 first; indices ascending inside each front.

    ``violations`` (total constraint violation per point) switches on
    constrained dominance: feasible points beat infeasible ones and, between
    infeasible points, the smaller violation wins.
    """
    r = ranks(points, violations)
    if r.size == 0:
        return []
    return [np.flatnonzero(r == k).tolist() for k in range(int(r.max()) + 1)]


def crowding_distance(front) -> np.ndarray:
    """Normalized neighbor-gap sums; boundary members get ``inf``."""
    F = _as_matrix(front)
    n, k = F.shape
    d = np.zeros(n)
    if n <= 2:
        d[:] = SENTINEL
        return d
    for j in range(k):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        span = col[-1] - col[0]
        d[order[0]] = d[order[-1]] = SENTINEL
        if span > 0:
            d[order[1:-1]] += (col[2:] - col[:-2]) / span
    return d


def _hv_recursive(F, ref):
    """Hypervolume by slicing along the last objective (exact, for small sets)."""
    if F.shape[0] == 0:
        return 0.0
    if F.shape[1] == 1:
        return float(ref[0] - F[:, 0].min())
    if F.shape[1] == 2:
        return _k.hypervolume_2d(F, ref)
    order = np.argsort(F[:, -1], kind="stable")
    F = F[order]
    hv = 0.0
    for i in range(F.shape[0]):
        upper = F[i + 1, -1] if i + 1 < F.shape[0] else ref[-1]
        depth = upper - F[i, -1]
        if depth > 0:
            hv += depth * _hv_recursive(F[: i + 1, :-1], ref[:-1])
    return hv


def hypervolume(points, ref) -> float:
    F = _as_matrix(points)
    ref = np.asarray(ref, dtype=float)
    if F.shape[0] == 0:
        return 0.0
    if F.shape[1] != ref.size:
        raise ValueError("reference point dimension mismatch")
    F = F[np.all(F < ref, axis=1)]
    if F.shape[1] == 2:
        return _k.hypervolume_2d(F, ref)
    return float(_hv_recursive(F, ref))
