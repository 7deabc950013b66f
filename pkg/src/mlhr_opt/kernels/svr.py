"""SMO solver for the epsilon-insensitive regression dual.

Variables are stacked as beta = [alpha, alpha_star] with signs s = [+1, -1];
the dual is  min 1/2 beta' Q beta + p' beta,  s' beta = 0,  0 <= beta <= C
with Q_uv = s_u s_v G[u mod m, v mod m] and p = [eps - y, eps + y].
Working-set selection follows the second-order rule used by LIBSVM.
"""

import numpy as np

from .._jit import jit

TAU = 1e-12


@jit
def smo_solve(G, y, eps, C, tol, max_iter):
    """Return (beta, grad, iterations, gap). ``gap`` <= tol means converged."""
    m = y.size
    n = 2 * m
    beta = np.zeros(n)
    sgn = np.empty(n)
    grad = np.empty(n)
    for t in range(m):
        sgn[t] = 1.0
        sgn[t + m] = -1.0
        grad[t] = eps - y[t]
        grad[t + m] = eps + y[t]
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (sgn[t] > 0 and beta[t] < C) or (sgn[t] < 0 and beta[t] > 0):
                v = -sgn[t] * grad[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        if i >= 0:
            ii = i % m
            for t in range(n):
                if (sgn[t] > 0 and beta[t] > 0) or (sgn[t] < 0 and beta[t] < C):
                    v = sgn[t] * grad[t]
                    if v > gmax2:
                        gmax2 = v
                    b = gmax + v
                    if b > 0:
                        tt = t % m
                        a = G[ii, ii] + G[tt, tt] - 2.0 * G[ii, tt]
                        if a <= 0:
                            a = TAU
                        o = -(b * b) / a
                        if o <= obj_min:
                            obj_min = o
                            j = t
        gap = gmax + gmax2
        if i < 0 or j < 0 or gap < tol:
            break
        it += 1
        ii = i % m
        jj = j % m
        q_ii = G[ii, ii]
        q_jj = G[jj, jj]
        q_ij = sgn[i] * sgn[j] * G[ii, jj]
        old_i = beta[i]
        old_j = beta[j]
        if sgn[i] != sgn[j]:
            quad = q_ii + q_jj + 2.0 * q_ij
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -diff
            if diff > 0:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = C - diff
            else:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = C + diff
        else:
            quad = q_ii + q_jj - 2.0 * q_ij
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if total > C:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = total - C
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = total
            if total > C:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = total - C
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = total
        d_i = beta[i] - old_i
        d_j = beta[j] - old_j
        for t in range(n):
            tt = t % m
            grad[t] += sgn[t] * (sgn[i] * G[tt, ii] * d_i + sgn[j] * G[tt, jj] * d_j)
    return beta, grad, it, gap


@jit
def bias(beta, grad, C, m):
    """Offset b = -rho, averaged over free variables (midpoint of the feasible range otherwise)."""
    n = 2 * m
    ub = np.inf
    lb = -np.inf
    s = 0.0
    n_free = 0
    for t in range(n):
        sg = 1.0 if t < m else -1.0
        yg = sg * grad[t]
        if beta[t] >= C:
            if sg < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif beta[t] <= 0:
            if sg > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            s += yg
    if n_free > 0:
        rho = s / n_free
    else:
        rho = 0.5 * (ub + lb)
    return -rho
