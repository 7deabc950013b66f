"""Kernel-expansion regression fitted with an epsilon-insensitive tube.

The fitted model is f(x) = sum_i c_i k(x, x_i) + b with the penalty on the
plain coefficient norm 1/2 ||c||^2. That is a linear SVR on the empirical
kernel features phi(x) = [k(x, x_1), ..., k(x, x_m)], so the dual works on
G = K K and the primal coefficients come back as c = K (alpha - alpha_star).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..kernels import svr as _k
from .dataset import Dataset
from .kernel import se_kernel

GAP_TOL = 1e-9


class SvrFitError(RuntimeError):
    pass


@dataclass
class SvrSurrogate:
    c: np.ndarray
    b: float
    theta_h: np.ndarray
    epsilon: float
    lambda_pen: float
    zeta_u: np.ndarray
    zeta_l: np.ndarray
    X: np.ndarray
    dual: np.ndarray  # alpha - alpha_star
    kkt_residual: float
    iterations: int

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return se_kernel(x, self.X, self.theta_h) @ self.c + self.b

    @property
    def objective(self) -> float:
        return 0.5 * float(self.c @ self.c) + self.lambda_pen * float(np.sum(self.zeta_u + self.zeta_l))

    def hyperparams(self) -> dict:
        return {"theta_h": [float(v) for v in self.theta_h], "epsilon": float(self.epsilon),
                "lambda_pen": float(self.lambda_pen), "b": float(self.b),
                "kkt_residual": float(self.kkt_residual), "iterations": int(self.iterations)}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.hyperparams(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def kkt_residual(K, y, c, b, beta, lambda_pen, epsilon) -> float:
    """Largest violation of the optimality conditions of the tube problem.

    Covers complementary slackness of each dual variable against its
    residual, stationarity c = K(alpha - alpha_star), and the balance
    sum(alpha - alpha_star) = 0.
    """
    m = y.size
    a, a_star = beta[:m], beta[m:]
    r = y - (K @ c + b)
    scale = max(lambda_pen, 1.0)
    tol_b = 1e-12 * scale

    def side(dual, slack):
        # slack = eps - residual on that side; dual=0 needs slack>=0, dual=C needs slack<=0, free needs 0
        viol = np.where(dual <= tol_b, np.maximum(0.0, -slack),
                        np.where(dual >= lambda_pen - tol_b, np.maximum(0.0, slack), np.abs(slack)))
        return float(viol.max(initial=0.0))

    res = max(side(a, epsilon - r), side(a_star, epsilon + r))
    res = max(res, float(np.max(np.abs(c - K @ (a - a_star)), initial=0.0)))
    res = max(res, abs(float(np.sum(a - a_star))))
    return res


def svr_fit(data, y=None, lambda_pen: float = 10.0, epsilon: float = 0.01, theta_h=1.0, *, output: int = 0,
            max_iter: int | None = None, tol: float = GAP_TOL) -> SvrSurrogate:
    if isinstance(data, Dataset):
        X, yv = data.X, data.Y[:, output]
    else:
        X = np.atleast_2d(np.asarray(data, dtype=float))
        yv = np.asarray(y, dtype=float).ravel()
    m, n = X.shape
    if m < 1 or yv.size != m:
        raise ValueError("need matching X and y with m >= 1")
    if not lambda_pen > 0:
        raise ValueError("lambda_pen must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    theta = np.broadcast_to(np.asarray(theta_h, dtype=float), (n,)).copy()
    if np.any(theta <= 0):
        raise ValueError("theta_h must be positive")
    K = se_kernel(X, X, theta)
    G = np.ascontiguousarray(K @ K)
    if max_iter is None:
        max_iter = max(1_000_000, 2000 * m)
    beta, grad, iters, gap = _k.smo_solve(G, np.ascontiguousarray(yv), float(epsilon), float(lambda_pen),
                                          float(tol), int(max_iter))
    if not gap < tol and iters >= max_iter:
        raise SvrFitError(f"SMO did not converge in {max_iter} iterations (gap {gap:.3g})")
    b = float(_k.bias(beta, grad, float(lambda_pen), m))
    if not math.isfinite(b):
        b = float(np.median(yv))
    dual = beta[:m] - beta[m:]
    c = K @ dual
    r = yv - (K @ c + b)
    zeta_l = np.maximum(0.0, r - epsilon)
    zeta_u = np.maximum(0.0, -r - epsilon)
    res = kkt_residual(K, yv, c, b, beta, lambda_pen, epsilon)
    return SvrSurrogate(c=c, b=b, theta_h=theta, epsilon=float(epsilon), lambda_pen=float(lambda_pen),
                        zeta_u=zeta_u, zeta_l=zeta_l, X=X.copy(), dual=dual, kkt_residual=res,
                        iterations=int(iters))
