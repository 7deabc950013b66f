"""Squared-exponential kernel shared by the GP and SVR surrogates."""

import numpy as np


def se_kernel(A, B, theta, sigma2=1.0) -> np.ndarray:
    """sigma2 * exp(-sum_k theta_k (a_k - b_k)^2) for every row pair of A and B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    theta = np.asarray(theta, dtype=float)
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2) @ theta
    return sigma2 * np.exp(-d2)
