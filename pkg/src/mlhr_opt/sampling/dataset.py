"""Normalized training data D^k = (X^k, Y^k)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    X: np.ndarray  # (m, n) in [0, 1]
    Y: np.ndarray  # (m, n_r)
    bounds: np.ndarray  # (n, 2) physical (min, max) per dimension
    k: int = 0

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float)
        self.Y = Y.reshape(-1, 1) if Y.ndim == 1 else Y
        if self.bounds is None:
            self.bounds = np.tile([0.0, 1.0], (self.X.shape[1], 1))
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        m = self.X.shape[0]
        if m < 1:
            raise ValueError("dataset needs at least one row")
        if self.Y.shape[0] != m:
            raise ValueError("X and Y row counts differ")
        if self.bounds.shape[0] != self.X.shape[1]:
            raise ValueError("bounds do not match X columns")
        if np.any(self.X < 0) or np.any(self.X > 1) or not np.all(np.isfinite(self.X)):
            raise ValueError("X entries must lie in [0, 1]")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def physical(self, X=None) -> np.ndarray:
        X = self.X if X is None else np.asarray(X, dtype=float)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + X * (hi - lo)

    def normalize(self, X_phys) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        span = np.where(hi > lo, hi - lo, 1.0)
        return np.clip((np.asarray(X_phys, dtype=float) - lo) / span, 0.0, 1.0)

    def append(self, X_new, Y_new) -> "Dataset":
        X_new = np.asarray(X_new, dtype=float).reshape(-1, self.n)
        Y_new = np.asarray(Y_new, dtype=float).reshape(-1, self.Y.shape[1])
        return Dataset(np.vstack([self.X, X_new]), np.vstack([self.Y, Y_new]), self.bounds.copy(), self.k)

    def to_csv(self, path=None, digits: int = 17) -> str:
        n, nr = self.n, self.Y.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(nr)])
        fmt = f"{{:.{digits}g}}"
        for x, y in zip(self.X, self.Y):
            w.writerow([fmt.format(v) for v in x] + [fmt.format(v) for v in y])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, bounds=None, k: int = 0) -> "Dataset":
        """Read ``x1..xn,y1..ynr`` columns; ``source`` is a path or CSV text."""
        if isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source, newline="") as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        header = [h.strip() for h in rows[0]]
        xi = [i for i, h in enumerate(header) if h.startswith("x")]
        yi = [i for i, h in enumerate(header) if h.startswith("y")]
        if not xi or len(xi) + len(yi) != len(header):
            raise ValueError("header must be x1..xn,y1..ynr")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(header))
        Y = data[:, yi] if yi else np.zeros((data.shape[0], 0))
        return cls(data[:, xi], Y, bounds, k)
