"""Density-based clustering (DBSCAN) on Euclidean distances."""

import numpy as np

from .._jit import ENABLED, jit


@jit
def dbscan_loop(X, eps, min_samples):
    """Labels 0..k-1 for clustered points, -1 for noise.

    Seeds are visited in index order and a cluster is fully expanded before
    the next seed, so a border point joins the first cluster that reaches it.
    """
    n, d = X.shape
    eps2 = eps * eps
    adj = np.zeros((n, n), dtype=np.bool_)
    count = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                s += diff * diff
            if s <= eps2:
                adj[i, j] = True
                count[i] += 1
    core = count >= min_samples
    labels = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        top = 0
        stack[top] = i
        top += 1
        labels[i] = cluster
        while top > 0:
            top -= 1
            p = stack[top]
            if not core[p]:
                continue
            for q in range(n):
                if adj[p, q] and labels[q] == -1:
                    labels[q] = cluster
                    stack[top] = q
                    top += 1
        cluster += 1
    return labels


def dbscan_numpy(X, eps, min_samples):
    n = X.shape[0]
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    adj = d2 <= eps * eps
    core = adj.sum(axis=1) >= min_samples
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        stack = [i]
        while stack:
            p = stack.pop()
            if not core[p]:
                continue
            new = np.flatnonzero(adj[p] & (labels == -1))
            labels[new] = cluster
            stack.extend(new[::-1].tolist())
        cluster += 1
    return labels


dbscan = dbscan_loop if ENABLED else dbscan_numpy
