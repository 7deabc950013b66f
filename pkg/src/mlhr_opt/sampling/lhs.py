"""Latin hypercube designs in the unit cube and the phi_p space-filling score."""

from __future__ import annotations

import numpy as np

from ..kernels import lhs as _k


def lhs_init(n: int, dims: int, seed=None) -> np.ndarray:
    """Random Latin hypercube: one point per stratum [k/n, (k+1)/n) in every column.

    Each column is an independent random permutation of the strata with a
    uniform offset inside the stratum.
    """
    n, dims = int(n), int(dims)
    if n < 2:
        raise ValueError("need n >= 2")
    if dims < 1:
        raise ValueError("need dims >= 1")
    rng = np.random.default_rng(seed)
    X = np.empty((n, dims))
    for j in range(dims):
        perm = rng.permutation(n)
        u = rng.random(n)
        x = (perm + u) / n
        top = np.nextafter((perm + 1) / n, 0.0)
        X[:, j] = np.minimum(x, top)
    return X


def is_latin(X: np.ndarray) -> bool:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    k = np.arange(n)
    for col in X.T:
        s = np.sort(col)
        if not (np.all(k / n <= s) and np.all(s < (k + 1) / n)):
            return False
    return True


def phi_p(X, p: float = 50.0, t: float = 1.0) -> float:
    """Space-filling score; ``inf`` when two samples coincide."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if p < 1 or t < 1:
        raise ValueError("need p >= 1 and t >= 1")
    return float(_k.phi_from_distances(_k.distance_matrix(np.ascontiguousarray(X), float(t)), float(p)))


def lhs_optimize(X, iterations: int = 500, seed=None, p: float = 50.0, t: float = 1.0,
                 return_trace: bool = False):
    """Swap search that lowers phi_p while keeping every column a permutation.

    Candidate swaps (column, row a, row b) are drawn up front from ``seed``
    so the numba and numpy paths walk the same sequence.
    """
    X = np.array(X, dtype=float, order="C")
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("X must be an (n >= 2, dims) matrix")
    iterations = int(iterations)
    rng = np.random.default_rng(seed)
    n, d = X.shape
    cols = rng.integers(0, d, iterations)
    rows_a = rng.integers(0, n, iterations)
    rows_b = rng.integers(0, n, iterations)
    if iterations:
        trace = _k.swap_search(X, cols, rows_a, rows_b, float(p), float(t))
    else:
        trace = np.empty(0)
    return (X, trace) if return_trace else X
