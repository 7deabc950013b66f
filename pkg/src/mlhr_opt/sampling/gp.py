"""Zero-mean Gaussian-process surrogate with likelihood-fitted hyperparameters."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from .dataset import Dataset
from .kernel import se_kernel

THETA_BOUNDS = (1e-3, 1e3)
SIGMA_BOUNDS = (1e-6, 1e3)
JITTER_START = 1e-10
JITTER_MAX = 1e-6
N_STARTS = 8


class GpFitError(RuntimeError):
    pass


def _factor(C):
    """Cholesky factor of C, adding diagonal jitter 1e-10, 1e-9, ... 1e-6 if needed."""
    try:
        return cholesky(C, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(C.shape[0])
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return cholesky(C + jitter * eye, lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= 10.0
    raise GpFitError("covariance matrix is not positive definite even with jitter 1e-6")


def log_likelihood(X, y, theta, sigma2, sigma_eps=0.0) -> float:
    """-m/2 log 2pi - 1/2 log|C + s_eps^2 I| - 1/2 y'(C + s_eps^2 I)^-1 y; -inf if unfactorable."""
    try:
        return _log_likelihood(X, y, theta, sigma2, sigma_eps)[0]
    except GpFitError:
        return -math.inf


def _log_likelihood(X, y, theta, sigma2, sigma_eps):
    m = y.size
    C = se_kernel(X, X, theta, sigma2) + sigma_eps**2 * np.eye(m)
    L, jitter = _factor(C)
    alpha = cho_solve((L, True), y, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    value = -0.5 * m * math.log(2 * math.pi) - 0.5 * logdet - 0.5 * float(y @ alpha)
    if not math.isfinite(value):
        raise GpFitError("non-finite likelihood")
    return value, alpha, jitter


@dataclass
class GpSurrogate:
    theta_h: np.ndarray
    sigma2: float
    sigma_eps: float
    alpha: np.ndarray
    X: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    jitter: float = 0.0
    log_likelihood: float = math.nan
    init_log_likelihood: float = math.nan

    def predict(self, x_pred) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x_pred, dtype=float))
        k = se_kernel(x, self.X, self.theta_h, self.sigma2)
        return self.y_mean + self.y_scale * (k @ self.alpha)

    def hyperparams(self) -> dict:
        return {
            "theta_h": [float(v) for v in self.theta_h], "sigma2": float(self.sigma2),
            "sigma_eps": float(self.sigma_eps), "jitter": float(self.jitter),
            "y_mean": float(self.y_mean), "y_scale": float(self.y_scale),
            "log_likelihood": float(self.log_likelihood),
            "init_log_likelihood": float(self.init_log_likelihood),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.hyperparams(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _unpack(data, y, output):
    if isinstance(data, Dataset):
        return data.X, data.Y[:, output]
    X = np.atleast_2d(np.asarray(data, dtype=float))
    return X, np.asarray(y, dtype=float).ravel()


def _coordinate_search(f, z0, lo, hi, step=1.0, min_step=1e-3, max_evals=400):
    """Maximise f over a box by compass moves with step halving; never accepts a worse point."""
    z = z0.copy()
    best = f(z)
    evals = 1
    while step >= min_step and evals < max_evals:
        improved = False
        for k in range(z.size):
            for sign in (1.0, -1.0):
                trial = z.copy()
                trial[k] = min(hi[k], max(lo[k], z[k] + sign * step))
                if trial[k] == z[k]:
                    continue
                val = f(trial)
                evals += 1
                if val > best:
                    z, best, improved = trial, val, True
                    break
        if not improved:
            step *= 0.5
    return z, best


def gp_fit(data, y=None, init_theta=None, sigma_eps: float = 0.0, *, init_sigma2=None, output: int = 0,
           optimize: bool = True, n_starts: int = N_STARTS, seed=0, normalize_y: bool = False,
           max_evals: int = 400) -> GpSurrogate:
    """Fit theta_h and sigma2 by maximising the log-likelihood, then solve for alpha.

    Search runs in log10 space from ``n_starts`` points (the first is the
    supplied initial guess) with bounds theta in [1e-3, 1e3] and sigma in
    [1e-6, 1e3]. ``sigma_eps`` is held fixed. With ``normalize_y`` the
    targets are centred and scaled before fitting (the zero-mean model is
    then applied to the standardised data).
    """
    X, yv = _unpack(data, y, output)
    m, n = X.shape
    if m < 2:
        raise ValueError("need at least 2 samples")
    if yv.size != m:
        raise ValueError("X and y sizes differ")
    if sigma_eps < 0:
        raise ValueError("sigma_eps must be >= 0")
    y_mean, y_scale = 0.0, 1.0
    if normalize_y:
        y_mean = float(yv.mean())
        y_scale = float(yv.std()) or 1.0
    yt = (yv - y_mean) / y_scale

    theta0 = np.full(n, 1.0) if init_theta is None else np.broadcast_to(np.asarray(init_theta, float), (n,)).copy()
    if init_sigma2 is None:
        init_sigma2 = max(float(np.mean(yt**2)), 1e-6)
    lo = np.r_[np.full(n, math.log10(THETA_BOUNDS[0])), math.log10(SIGMA_BOUNDS[0])]
    hi = np.r_[np.full(n, math.log10(THETA_BOUNDS[1])), math.log10(SIGMA_BOUNDS[1])]
    z0 = np.clip(np.r_[np.log10(np.maximum(theta0, 1e-300)), 0.5 * math.log10(init_sigma2)], lo, hi)

    def f(z):
        return log_likelihood(X, yt, 10.0 ** z[:n], 10.0 ** (2 * z[n]), sigma_eps)

    init_ll = f(z0)
    best_z, best_ll = z0, init_ll
    if optimize:
        rng = np.random.default_rng(seed)
        starts = [z0] + [rng.uniform(lo, hi) for _ in range(max(0, n_starts - 1))]
        for z_start in starts:
            z, ll = _coordinate_search(f, np.asarray(z_start, float), lo, hi, max_evals=max_evals)
            if ll > best_ll:
                best_z, best_ll = z, ll
    if not math.isfinite(best_ll):
        raise GpFitError("no hyperparameters with a factorable covariance")
    theta = 10.0 ** best_z[:n]
    sigma2 = 10.0 ** (2 * best_z[n])
    ll, alpha, jitter = _log_likelihood(X, yt, theta, sigma2, sigma_eps)
    return GpSurrogate(theta_h=theta, sigma2=sigma2, sigma_eps=float(sigma_eps), alpha=alpha, X=X.copy(),
                       y_mean=y_mean, y_scale=y_scale, jitter=jitter, log_likelihood=ll,
                       init_log_likelihood=init_ll)


def gp_predict(s: GpSurrogate, x_pred) -> np.ndarray:
    return s.predict(x_pred)
