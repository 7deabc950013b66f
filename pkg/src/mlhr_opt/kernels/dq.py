"""Scalar dq-frame kernels: torque, voltage and the MTPA/MTPV searches.

Every kernel takes the machine packed as a float64 vector ``mp``::

    mp = [R_s, p, lambda_m, Ld, Lq0, sat_iq, I_m, V_m]

``sat_iq <= 0`` disables the q-axis saturation law. Angles are radians here.
"""

import math

import numpy as np

from .._jit import jit

R_S, POLE_PAIRS, LAMBDA_M, LD, LQ0, SAT_IQ, I_MAX, V_MAX = range(8)

GAMMA_MAX = 0.5 * math.pi * (1.0 - 1e-9)
N_SCAN = 90
GOLDEN_TOL = 1e-10
VOLT_RTOL = 1e-9

# objective selectors for the shared golden search
OBJ_CURRENT = 0  # current needed for T_ref at gamma
OBJ_NEG_TORQUE = 1  # -torque at fixed current
OBJ_VOLTAGE = 2  # |v|^2 along the T_ref curve


@jit
def lq_eff(mp, i_q):
    sat = mp[SAT_IQ]
    if sat > 0.0:
        return mp[LQ0] / (1.0 + abs(i_q) / sat)
    return mp[LQ0]


@jit
def dlq_diq(mp, i_q):
    sat = mp[SAT_IQ]
    if sat <= 0.0 or i_q == 0.0:
        return 0.0
    s = 1.0 + abs(i_q) / sat
    return -mp[LQ0] / (sat * s * s) * math.copysign(1.0, i_q)


@jit
def torque_dq(mp, i_d, i_q):
    lq = lq_eff(mp, i_q)
    return 1.5 * mp[POLE_PAIRS] * (mp[LAMBDA_M] + (mp[LD] - lq) * i_d) * i_q


@jit
def torque_polar(mp, i_s, gamma):
    return torque_dq(mp, -i_s * math.sin(gamma), i_s * math.cos(gamma))


@jit
def voltages_dq(mp, i_d, i_q, w_e):
    lq = lq_eff(mp, i_q)
    v_d = mp[R_S] * i_d - w_e * lq * i_q
    v_q = mp[R_S] * i_q + w_e * mp[LD] * i_d + w_e * mp[LAMBDA_M]
    return v_d, v_q


@jit
def voltage_sq_polar(mp, i_s, gamma, w_e):
    v_d, v_q = voltages_dq(mp, -i_s * math.sin(gamma), i_s * math.cos(gamma), w_e)
    return v_d * v_d + v_q * v_q


@jit
def torque_gamma_gradient(mp, i_s, gamma):
    """dT/dgamma including the saturation partial of Lq (zero when unsaturated)."""
    s = math.sin(gamma)
    c = math.cos(gamma)
    i_q = i_s * c
    lq = lq_eff(mp, i_q)
    dlq = dlq_diq(mp, i_q) * (-i_s * s)
    dlam = 0.0
    dld = 0.0
    i2 = i_s * i_s
    return 1.5 * mp[POLE_PAIRS] * (
        -mp[LAMBDA_M] * i_s * s
        + dlam * i_s * c
        - mp[LD] * i2 * math.cos(2.0 * gamma)
        + lq * i2 * math.cos(2.0 * gamma)
        - dld * 0.5 * i2 * math.sin(2.0 * gamma)
        + dlq * 0.5 * i2 * math.sin(2.0 * gamma)
    )


@jit
def required_current(mp, gamma, t_ref):
    """Smallest i_s on the ray ``gamma`` with torque >= t_ref (bisection); inf if none."""
    if t_ref <= 0.0:
        return 0.0
    hi = mp[I_MAX]
    cap = 1e3 * mp[I_MAX]
    while torque_polar(mp, hi, gamma) < t_ref:
        hi *= 2.0
        if hi > cap:
            return math.inf
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if torque_polar(mp, mid, gamma) >= t_ref:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break
    return hi


@jit
def _objective(mode, mp, gamma, t_ref, w_e, i_s):
    if mode == OBJ_CURRENT:
        return required_current(mp, gamma, t_ref)
    if mode == OBJ_NEG_TORQUE:
        return -torque_polar(mp, i_s, gamma)
    i_req = required_current(mp, gamma, t_ref)
    if not math.isfinite(i_req):
        return math.inf
    return voltage_sq_polar(mp, i_req, gamma, w_e)


@jit
def _golden(mode, mp, lo, hi, t_ref, w_e, i_s):
    invphi = 0.5 * (math.sqrt(5.0) - 1.0)
    a = lo
    b = hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _objective(mode, mp, c, t_ref, w_e, i_s)
    fd = _objective(mode, mp, d, t_ref, w_e, i_s)
    while b - a > GOLDEN_TOL:
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - invphi * (b - a)
            fc = _objective(mode, mp, c, t_ref, w_e, i_s)
        else:
            a = c
            c = d
            fc = fd
            d = a + invphi * (b - a)
            fd = _objective(mode, mp, d, t_ref, w_e, i_s)
    x = 0.5 * (a + b)
    fx = _objective(mode, mp, x, t_ref, w_e, i_s)
    # the bracket ends can win when the optimum sits on the domain boundary
    flo = _objective(mode, mp, lo, t_ref, w_e, i_s)
    fhi = _objective(mode, mp, hi, t_ref, w_e, i_s)
    if flo <= fx and flo <= fhi:
        return lo, flo
    if fhi < fx:
        return hi, fhi
    return x, fx


@jit
def minimize_gamma(mode, mp, lo, hi, t_ref, w_e, i_s):
    """Scan ``N_SCAN`` steps over [lo, hi], then golden-refine around the best."""
    best = math.inf
    kbest = 0
    for k in range(N_SCAN + 1):
        g = lo + (hi - lo) * k / N_SCAN
        f = _objective(mode, mp, g, t_ref, w_e, i_s)
        if f < best:
            best = f
            kbest = k
    a = lo + (hi - lo) * max(kbest - 1, 0) / N_SCAN
    b = lo + (hi - lo) * min(kbest + 1, N_SCAN) / N_SCAN
    return _golden(mode, mp, a, b, t_ref, w_e, i_s)


@jit
def max_torque_at_current(mp, i_s):
    g, f = minimize_gamma(OBJ_NEG_TORQUE, mp, 0.0, GAMMA_MAX, 0.0, 0.0, i_s)
    return -f, g


@jit
def mtpa(mp, t_ref):
    """Return (i_s, gamma, feasible). Minimum current achieving t_ref."""
    if t_ref <= 0.0:
        return 0.0, 0.0, True
    g, i_s = minimize_gamma(OBJ_CURRENT, mp, 0.0, GAMMA_MAX, t_ref, 0.0, 0.0)
    # i_s(gamma) is flat at the optimum; polish on the stationarity of torque
    # along the constant-current circle, which has a sharp sign change.
    a = max(g - 1e-3, 0.0)
    b = min(g + 1e-3, GAMMA_MAX)
    ga = torque_gamma_gradient(mp, i_s, a)
    gb = torque_gamma_gradient(mp, i_s, b)
    if ga > 0.0 and gb < 0.0:
        for _ in range(100):
            mid = 0.5 * (a + b)
            if torque_gamma_gradient(mp, i_s, mid) > 0.0:
                a = mid
            else:
                b = mid
            if b - a <= 1e-15:
                break
        g_p = 0.5 * (a + b)
        i_p = required_current(mp, g_p, t_ref)
        if i_p <= i_s * (1.0 + 1e-12):
            g = g_p
            i_s = i_p
    feasible = i_s <= mp[I_MAX] * (1.0 + 1e-12)
    return i_s, g, feasible


@jit
def _current_boundary(mp, t_ref, g_in, g_out):
    """Bisect for the angle between g_in (current-feasible) and g_out (not)."""
    a = g_in
    b = g_out
    for _ in range(200):
        m = 0.5 * (a + b)
        if required_current(mp, m, t_ref) <= mp[I_MAX]:
            a = m
        else:
            b = m
        if abs(b - a) <= GOLDEN_TOL:
            break
    return a


@jit
def mtpv(mp, t_ref, w_e):
    """Return (i_s, gamma, feasible) minimising |v|^2 for t_ref with i_s <= I_m."""
    i_max = mp[I_MAX]
    v_max = mp[V_MAX]
    if t_ref <= 0.0:
        # zero torque: either no current or pure negative d-axis current
        v0 = w_e * mp[LAMBDA_M]
        r = mp[R_S]
        ld = mp[LD]
        i_d = -(w_e * w_e * ld * mp[LAMBDA_M]) / (r * r + w_e * w_e * ld * ld)
        if i_d < -i_max:
            i_d = -i_max
        vd, vq = voltages_dq(mp, i_d, 0.0, w_e)
        if vd * vd + vq * vq < v0 * v0 and i_d < 0.0:
            return -i_d, 0.5 * math.pi, math.sqrt(vd * vd + vq * vq) <= v_max * (1.0 + VOLT_RTOL)
        return 0.0, 0.0, abs(v0) <= v_max * (1.0 + VOLT_RTOL)
    i_a, g_a, ok = mtpa(mp, t_ref)
    if not ok:
        return i_a, g_a, False
    if required_current(mp, 0.0, t_ref) <= i_max:
        g_lo = 0.0
    else:
        g_lo = _current_boundary(mp, t_ref, g_a, 0.0)
    if required_current(mp, GAMMA_MAX, t_ref) <= i_max:
        g_hi = GAMMA_MAX
    else:
        g_hi = _current_boundary(mp, t_ref, g_a, GAMMA_MAX)
    if g_hi - g_lo <= GOLDEN_TOL:
        g = g_a
        vsq = voltage_sq_polar(mp, i_a, g_a, w_e)
    else:
        g, vsq = minimize_gamma(OBJ_VOLTAGE, mp, g_lo, g_hi, t_ref, w_e, 0.0)
    i_s = required_current(mp, g, t_ref)
    if i_s > i_max:
        # boundary rounding: stay on the current-feasible side
        i_s = i_max
    return i_s, g, math.sqrt(vsq) <= v_max * (1.0 + VOLT_RTOL)


@jit
def _voltage_boundary(mp, t_ref, w_e, g_bad, g_good):
    """Bisect along the t_ref curve for |v| = V_m between an over-voltage and a feasible angle."""
    v2 = mp[V_MAX] * mp[V_MAX]
    a = g_good
    b = g_bad
    for _ in range(200):
        m = 0.5 * (a + b)
        i_m = required_current(mp, m, t_ref)
        if voltage_sq_polar(mp, i_m, m, w_e) <= v2:
            a = m
        else:
            b = m
        if abs(b - a) <= GOLDEN_TOL:
            break
    return a


@jit
def plan(mp, t_ref, w_e, weaken):
    """Operating point for t_ref at w_e. Returns (i_s, gamma, feasible, above_base).

    MTPA when it respects the voltage limit. Otherwise the MTPV point, or with
    ``weaken`` the least-current voltage-feasible point between MTPA and MTPV.
    """
    i_s, g, ok = mtpa(mp, t_ref)
    if not ok:
        return i_s, g, False, False
    if math.sqrt(voltage_sq_polar(mp, i_s, g, w_e)) <= mp[V_MAX] * (1.0 + VOLT_RTOL):
        return i_s, g, True, False
    i_v, g_v, ok = mtpv(mp, t_ref, w_e)
    if not ok or not weaken or t_ref <= 0.0:
        return i_v, g_v, ok, True
    g_fw = _voltage_boundary(mp, t_ref, w_e, g, g_v)
    i_fw = required_current(mp, g_fw, t_ref)
    if i_fw > i_v or i_fw > mp[I_MAX]:
        return i_v, g_v, True, True
    return i_fw, g_fw, True, True


@jit
def max_torque_at_speed(mp, w_e):
    """Largest torque reachable under both limits at w_e (bisection on torque)."""
    t_hi, _ = max_torque_at_current(mp, mp[I_MAX])
    if t_hi <= 0.0:
        return 0.0
    _, _, ok, _ = plan(mp, t_hi, w_e, False)
    if ok:
        return t_hi
    _, _, ok0, _ = plan(mp, 0.0, w_e, False)
    if not ok0:
        return 0.0
    lo = 0.0
    hi = t_hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        _, _, ok, _ = plan(mp, mid, w_e, False)
        if ok:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * t_hi:
            break
    return lo


@jit
def map_kernel(mp, w_mech, torques, weaken, out_is, out_gamma, out_ok):
    pp = mp[POLE_PAIRS]
    for i in range(w_mech.shape[0]):
        w_e = pp * w_mech[i]
        for j in range(torques.shape[0]):
            i_s, g, ok, _ = plan(mp, torques[j], w_e, weaken)
            out_is[i, j] = i_s
            out_gamma[i, j] = g
            out_ok[i, j] = ok


def pack(R_s, p, lambda_m, Ld, Lq0, sat_iq, I_m, V_m):
    return np.array([R_s, p, lambda_m, Ld, Lq0, sat_iq, I_m, V_m], dtype=np.float64)
