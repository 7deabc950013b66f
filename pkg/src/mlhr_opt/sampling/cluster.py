"""Cluster promising designs and turn each cluster into a local sampling box."""

from __future__ import annotations

import numpy as np

from ..kernels import dbscan as _k

PERCENTILES = tuple(range(5, 100, 5))
INFLATE = 0.10  # relative growth of each box width
MIN_WIDTH = 0.10  # floor on box width, as a fraction of the global range


def dbscan(X, eps: float, min_samples: int = 3) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return np.asarray(_k.dbscan(X, float(eps), int(min_samples)))


def n_clusters(labels) -> int:
    labels = np.asarray(labels)
    return int(labels.max() + 1) if labels.size and labels.max() >= 0 else 0


def n_groups(labels) -> int:
    """Clusters plus unclustered (noise) points, each noise point counted as its own group."""
    labels = np.asarray(labels)
    return n_clusters(labels) + int(np.sum(labels < 0))


def pairwise_distances(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    return d[np.triu_indices(X.shape[0], 1)]


def select_radius(X, min_samples: int = 3, percentiles=PERCENTILES):
    """Pick the clustering radius d_m from percentiles of the pairwise distances.

    Walks the candidate percentiles in ascending order and keeps the first
    one whose group count equals the count at the next percentile, where a
    noise point counts as a group of its own (so a run of mostly-noise
    radii does not look stable). Falls back to the median distance when no such pair
    exists. Returns (d_m, labels).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    dist = pairwise_distances(X)
    pos = dist[dist > 0]
    if pos.size == 0:
        # all points coincide: one cluster
        return 1.0, np.zeros(X.shape[0], dtype=np.int64)
    radii = np.percentile(pos, percentiles)
    counts = []
    labels_at = []
    for r in radii:
        lab = dbscan(X, r, min_samples)
        labels_at.append(lab)
        counts.append(n_groups(lab))
    for k in range(len(radii) - 1):
        if n_clusters(labels_at[k]) >= 1 and counts[k] == counts[k + 1]:
            return float(radii[k]), labels_at[k]
    r = float(np.median(pos))
    return r, dbscan(X, r, min_samples)


def cluster_boxes(X, labels, lower, upper):
    """One box per cluster (noise points get their own box), inflated and clipped to the bounds."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    span = upper - lower
    groups = [np.flatnonzero(labels == c) for c in range(n_clusters(labels))]
    groups += [np.array([i]) for i in np.flatnonzero(labels < 0)]
    boxes = []
    for idx in groups:
        lo = X[idx].min(axis=0)
        hi = X[idx].max(axis=0)
        mid = 0.5 * (lo + hi)
        half = 0.5 * np.maximum((hi - lo) * (1.0 + INFLATE), MIN_WIDTH * span)
        boxes.append((np.clip(mid - half, lower, upper), np.clip(mid + half, lower, upper)))
    return boxes
