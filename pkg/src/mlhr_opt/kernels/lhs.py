"""Space-filling kernels: pairwise distances, the phi_p score and the swap search."""

import math

import numpy as np

from .._jit import ENABLED, jit


@jit
def distance_matrix_loop(X, t):
    n, d = X.shape
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                s += abs(X[i, k] - X[j, k]) ** t
            D[i, j] = s ** (1.0 / t)
            D[j, i] = D[i, j]
    return D


def distance_matrix_numpy(X, t):
    diff = np.abs(X[:, None, :] - X[None, :, :])
    return (diff**t).sum(axis=2) ** (1.0 / t)


@jit
def phi_from_distances_loop(D, p):
    """(sum_{i<j} d^-p)^(1/p), scaled by the smallest distance to avoid overflow."""
    n = D.shape[0]
    dmin = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            if D[i, j] < dmin:
                dmin = D[i, j]
    if dmin <= 0.0:
        return np.inf
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += (dmin / D[i, j]) ** p
    return s ** (1.0 / p) / dmin


def phi_from_distances_numpy(D, p):
    d = D[np.triu_indices(D.shape[0], 1)]
    dmin = d.min()
    if dmin <= 0.0:
        return math.inf
    return float(np.sum((dmin / d) ** p) ** (1.0 / p) / dmin)


@jit
def _update_rows(X, D, i, j, t):
    n, d = X.shape
    for r in (i, j):
        for k in range(n):
            if k == r:
                continue
            s = 0.0
            for c in range(d):
                s += abs(X[r, c] - X[k, c]) ** t
            D[r, k] = s ** (1.0 / t)
            D[k, r] = D[r, k]


@jit
def swap_search_loop(X, cols, rows_a, rows_b, p, t):
    """Column element-swap descent; returns the phi_p trace (one entry per iteration).

    A swap is kept only when it lowers phi_p, so the trace never increases.
    """
    D = distance_matrix_loop(X, t)
    cur = phi_from_distances_loop(D, p)
    trace = np.empty(cols.size)
    saved = np.empty(X.shape[0])
    for it in range(cols.size):
        c, a, b = cols[it], rows_a[it], rows_b[it]
        if a != b:
            for k in range(X.shape[0]):
                saved[k] = D[a, k]
            saved_b = D[b].copy()
            X[a, c], X[b, c] = X[b, c], X[a, c]
            _update_rows(X, D, a, b, t)
            new = phi_from_distances_loop(D, p)
            if new < cur:
                cur = new
            else:
                X[a, c], X[b, c] = X[b, c], X[a, c]
                for k in range(X.shape[0]):
                    D[a, k] = saved[k]
                    D[k, a] = saved[k]
                for k in range(X.shape[0]):
                    D[b, k] = saved_b[k]
                    D[k, b] = saved_b[k]
        trace[it] = cur
    return trace


def swap_search_numpy(X, cols, rows_a, rows_b, p, t):
    D = distance_matrix_numpy(X, t)
    cur = phi_from_distances_numpy(D, p)
    trace = np.empty(cols.size)
    for it, (c, a, b) in enumerate(zip(cols, rows_a, rows_b)):
        if a != b:
            X[[a, b], c] = X[[b, a], c]
            D_new = D.copy()
            rows = (np.abs(X[[a, b], None, :] - X[None, :, :]) ** t).sum(axis=2) ** (1.0 / t)
            D_new[[a, b], :] = rows
            D_new[:, [a, b]] = rows.T
            new = phi_from_distances_numpy(D_new, p)
            if new < cur:
                cur, D = new, D_new
            else:
                X[[a, b], c] = X[[b, a], c]
        trace[it] = cur
    return trace


if ENABLED:
    distance_matrix = distance_matrix_loop
    phi_from_distances = phi_from_distances_loop
    swap_search = swap_search_loop
else:
    distance_matrix = distance_matrix_numpy
    phi_from_distances = phi_from_distances_numpy
    swap_search = swap_search_numpy
