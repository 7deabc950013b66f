"""Independent brute-force oracles shared by the tests.

Nothing here imports the package solvers. The MTPA/MTPV oracles scan the
current angle on a 0.01 deg grid and get the stator current at each angle
from the closed-form root of the (quadratic in i_s) torque equation of an
unsaturated machine.
"""

import numpy as np

GRID_STEP_DEG = 0.01


def _gamma_grid(lo=0.0, hi=90.0, step=GRID_STEP_DEG):
    return np.radians(np.arange(lo, hi + 1e-9 * step, step))


def current_for_torque(p, lam, ld, lq, gamma, t_ref):
    """Smallest i_s >= 0 with torque(i_s, gamma) = t_ref (inf if none)."""
    s, c = np.sin(gamma), np.cos(gamma)
    a = 1.5 * p * (lq - ld) * s * c
    b = 1.5 * p * lam * c
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b + 4.0 * a * t_ref
        quad = 2.0 * t_ref / (b + np.sqrt(np.maximum(disc, 0.0)))
        out = np.where(b + np.sqrt(np.maximum(disc, 0.0)) > 0, quad, np.inf)
    return np.where(np.isfinite(out) & (out >= 0), out, np.inf)


def mtpa_grid(p, lam, ld, lq, t_ref):
    g = _gamma_grid()
    i_s = current_for_torque(p, lam, ld, lq, g, t_ref)
    k = int(np.argmin(i_s))
    return float(i_s[k]), float(np.degrees(g[k]))


def mtpv_grid(r, p, lam, ld, lq, i_max, t_ref, w_e, refine=True):
    """(i_s, gamma_deg, |v|) of the least-voltage current-feasible grid point.

    With ``refine`` a second pass re-scans +-0.02 deg around the coarse
    winner at 1e-5 deg, which matters when the current limit is active and
    i_s moves steeply with the angle.
    """
    best = _mtpv_scan(r, p, lam, ld, lq, i_max, t_ref, w_e, _gamma_grid())
    if best is None or not refine:
        return best
    g0 = best[1]
    fine = _gamma_grid(max(0.0, g0 - 0.02), min(90.0, g0 + 0.02), 1e-5)
    return _mtpv_scan(r, p, lam, ld, lq, i_max, t_ref, w_e, fine)


def _mtpv_scan(r, p, lam, ld, lq, i_max, t_ref, w_e, g):
    i_s = current_for_torque(p, lam, ld, lq, g, t_ref)
    ok = i_s <= i_max
    if not ok.any():
        return None
    i_d = -i_s * np.sin(g)
    i_q = i_s * np.cos(g)
    v_d = r * i_d - w_e * lq * i_q
    v_q = r * i_q + w_e * ld * i_d + w_e * lam
    vsq = np.where(ok, v_d * v_d + v_q * v_q, np.inf)
    k = int(np.argmin(vsq))
    return float(i_s[k]), float(np.degrees(g[k])), float(np.sqrt(vsq[k]))


def max_torque_grid(p, lam, ld, lq, i_s):
    g = _gamma_grid()
    t = 1.5 * p * (lam + (ld - lq) * (-i_s * np.sin(g))) * i_s * np.cos(g)
    k = int(np.argmax(t))
    return float(t[k]), float(np.degrees(g[k]))


def _accel_on_grid(vp, Tf, Tr):
    M = vp.m0 + vp.m1
    a = ((Tf + Tr) * vp.G_r * vp.eta_trans - vp.C_r * M * vp.g * vp.R_w) / ((vp.m0 + vp.m_app + vp.m1) * vp.R_w)
    fz_f = np.maximum(M * vp.g * (vp.L - vp.a_front) / vp.L - M * a * vp.H_CG / vp.L, 0.0)
    fz_r = np.maximum(M * vp.g * vp.a_front / vp.L + M * a * vp.H_CG / vp.L, 0.0)
    k = vp.G_r * vp.eta_trans / vp.R_w
    ok = (Tf * k <= vp.mu_max * fz_f + 1e-9) & (Tr * k <= vp.mu_max * fz_r + 1e-9)
    return np.where(ok, a, -np.inf)


def accel_grid(vp, step=0.1, refine=True):
    """Best acceleration over (T_front, T_rear) pairs, each checked at its own load transfer.

    A 0.1 N·m grid can miss the optimum by one step per friction-bound
    axle, so ``refine`` re-scans +-2 steps around the winner at 1e-3 N·m.
    """
    T = np.unique(np.append(np.arange(0.0, vp.T_m_max + 1e-9, step), vp.T_m_max))
    Tf, Tr = np.meshgrid(T, T, indexing="ij")
    A = _accel_on_grid(vp, Tf, Tr)
    k = np.unravel_index(int(np.argmax(A)), A.shape)
    best = float(A[k])
    if refine:
        f0, r0 = T[k[0]], T[k[1]]
        fine = np.arange(-2 * step, 2 * step + 1e-12, step / 100)
        Ff, Rf = np.meshgrid(np.clip(f0 + fine, 0, vp.T_m_max), np.clip(r0 + fine, 0, vp.T_m_max), indexing="ij")
        best = max(best, float(_accel_on_grid(vp, Ff, Rf).max()))
    return max(best, 0.0) if np.isfinite(best) else 0.0


def grade_sweep(vp, step_deg=0.001):
    """Largest slope (deg) on a uniform grid where the axle-limited torque holds the car."""
    th_deg = np.arange(0.0, 90.0 + 1e-12, step_deg)
    th = np.radians(th_deg)
    M = vp.m0 + vp.m1
    fz_f = np.maximum(M * vp.g * (np.cos(th) * (vp.L - vp.a_front) - np.sin(th) * vp.H_CG) / vp.L, 0.0)
    fz_r = np.maximum(M * vp.g * (np.cos(th) * vp.a_front + np.sin(th) * vp.H_CG) / vp.L, 0.0)
    k = vp.R_w / (vp.G_r * vp.eta_trans)
    supply = (np.minimum(vp.T_m_max, vp.mu_max * fz_f * k) + np.minimum(vp.T_m_max, vp.mu_max * fz_r * k)) / k
    ok = supply >= M * vp.g * (np.sin(th) + vp.C_r * np.cos(th))
    return float(th_deg[np.flatnonzero(ok)[-1]]) if ok.any() else 0.0
