"""MTPA/MTPV trajectories, torque-speed maps and the TPCA metric."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import dq as _dq
from .motor import MachineParams, OperatingPoint, efficiency, loss_arrays

log = logging.getLogger(__name__)

TPCA_REGIONS = (("low", 0.0, 380.0), ("accelerating", 380.0, 650.0), ("high", 650.0, 1000.0))
PREMIUM_THRESHOLD = 0.94
MAP_CSV_HEADER = "speed_rad_s,torque_Nm,gamma_deg,i_s_A,eta,feasible"


class InfeasibleError(RuntimeError):
    pass


def _point(m: MachineParams, mp, i_s, gamma_rad, omega_mech, feasible=True, max_torque=math.nan):
    i_d = -i_s * math.sin(gamma_rad)
    i_q = i_s * math.cos(gamma_rad)
    v_d, v_q = _dq.voltages_dq(mp, i_d, i_q, m.p * omega_mech)
    t_e = float(_dq.torque_dq(mp, i_d, i_q))
    eta = math.nan
    if feasible:
        losses = sum(float(x) for x in loss_arrays(m, omega_mech, i_d, i_q))
        eta = efficiency(losses, max(t_e * omega_mech, 0.0))
    return OperatingPoint(
        omega_mech=float(omega_mech), T_e=t_e, i_s=float(i_s), gamma=math.degrees(gamma_rad),
        i_d=float(i_d), i_q=float(i_q), v_d=float(v_d), v_q=float(v_q), eta=eta,
        feasible=bool(feasible), max_torque=float(max_torque),
    )


def mtpa_solve(m: MachineParams, T_ref: float) -> OperatingPoint:
    """Minimum-current operating point for ``T_ref`` at standstill."""
    if T_ref < 0:
        raise ValueError("T_ref must be >= 0")
    mp = m.packed()
    i_s, g, ok = _dq.mtpa(mp, float(T_ref))
    if ok:
        return _point(m, mp, i_s, g, 0.0)
    t_max, g_max = _dq.max_torque_at_current(mp, m.I_m)
    return _point(m, mp, m.I_m, g_max, 0.0, feasible=False, max_torque=t_max)


def mtpv_solve(m: MachineParams, T_ref: float, omega_e: float) -> OperatingPoint:
    """Minimum-voltage operating point for ``T_ref`` at electrical speed ``omega_e``."""
    if T_ref < 0 or omega_e <= 0:
        raise ValueError("need T_ref >= 0 and omega_e > 0")
    mp = m.packed()
    i_s, g, ok = _dq.mtpv(mp, float(T_ref), float(omega_e))
    w_mech = omega_e / m.p
    if ok:
        return _point(m, mp, i_s, g, w_mech)
    return _point(m, mp, i_s, g, w_mech, feasible=False, max_torque=_dq.max_torque_at_speed(mp, float(omega_e)))


def trajectory_plan(m: MachineParams, T_ref: float, omega_mech: float,
                    field_weakening: bool = True) -> OperatingPoint:
    """MTPA below base speed; above it the least-current voltage-feasible point.

    ``field_weakening=False`` returns the minimum-voltage (MTPV) point instead
    whenever MTPA breaks the voltage limit.
    """
    if T_ref < 0 or omega_mech < 0:
        raise ValueError("need T_ref >= 0 and omega_mech >= 0")
    mp = m.packed()
    w_e = m.p * float(omega_mech)
    i_s, g, ok, _ = _dq.plan(mp, float(T_ref), w_e, bool(field_weakening))
    if ok:
        return _point(m, mp, i_s, g, omega_mech)
    return _point(m, mp, i_s, g, omega_mech, feasible=False, max_torque=_dq.max_torque_at_speed(mp, w_e))


def max_torque_at_speed(m: MachineParams, omega_mech: float) -> float:
    return float(_dq.max_torque_at_speed(m.packed(), m.p * float(omega_mech)))


@dataclass
class TorqueSpeedMap:
    speed_axis: np.ndarray
    torque_axis: np.ndarray
    feasible: np.ndarray  # (n_speed, n_torque) bool
    gamma: np.ndarray  # deg
    i_s: np.ndarray
    i_d: np.ndarray
    i_q: np.ndarray
    v_d: np.ndarray
    v_q: np.ndarray
    eta: np.ndarray

    @property
    def shape(self):
        return self.feasible.shape

    def cell(self, i: int, j: int) -> OperatingPoint | None:
        if not self.feasible[i, j]:
            return None
        return OperatingPoint(
            omega_mech=float(self.speed_axis[i]), T_e=float(self.torque_axis[j]), i_s=float(self.i_s[i, j]),
            gamma=float(self.gamma[i, j]), i_d=float(self.i_d[i, j]), i_q=float(self.i_q[i, j]),
            v_d=float(self.v_d[i, j]), v_q=float(self.v_q[i, j]), eta=float(self.eta[i, j]),
        )

    def nearest(self, omega_mech: float, torque: float) -> tuple[int, int]:
        i = int(np.argmin(np.abs(self.speed_axis - omega_mech)))
        j = int(np.argmin(np.abs(self.torque_axis - torque)))
        return i, j

    def to_csv(self, path=None) -> str:
        lines = [MAP_CSV_HEADER]
        for i, w in enumerate(self.speed_axis):
            for j, t in enumerate(self.torque_axis):
                ok = bool(self.feasible[i, j])
                if ok:
                    vals = (self.gamma[i, j], self.i_s[i, j], self.eta[i, j])
                    rest = ",".join(f"{v:.9g}" for v in vals)
                else:
                    rest = "nan,nan,nan"
                lines.append(f"{w:.9g},{t:.9g},{rest},{int(ok)}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _check_axis(axis, name):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0 or np.any(np.diff(axis) <= 0):
        raise ValueError(f"{name} must be a non-empty strictly increasing 1-D array")
    return axis


def build_map(m: MachineParams, speed_axis, torque_axis, workers: int = 1,
              field_weakening: bool = True) -> TorqueSpeedMap:
    """Fill every (speed, torque) cell with the planned operating point and its efficiency.

    Speed rows are independent; with ``workers > 1`` they are split across
    threads and written back by row index, so the result does not depend on
    scheduling.
    """
    w = _check_axis(speed_axis, "speed_axis")
    t = _check_axis(torque_axis, "torque_axis")
    if np.any(w < 0) or np.any(t < 0):
        raise ValueError("axes must be non-negative")
    mp = m.packed()
    shape = (w.size, t.size)
    i_s = np.zeros(shape)
    g = np.zeros(shape)
    ok = np.zeros(shape, dtype=np.bool_)

    def run(rows):
        lo, hi = rows
        _dq.map_kernel(mp, w[lo:hi], t, bool(field_weakening), i_s[lo:hi], g[lo:hi], ok[lo:hi])

    workers = max(1, int(workers))
    bounds = np.linspace(0, w.size, min(workers * 4, w.size) + 1).astype(int)
    chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        for c in chunks:
            run(c)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, chunks))

    i_d = -i_s * np.sin(g)
    i_q = i_s * np.cos(g)
    lq = np.vectorize(lambda iq: _dq.lq_eff(mp, iq))(i_q) if m.saturation else m.Lq0
    w_e = m.p * w[:, None]
    v_d = m.R_s * i_d - w_e * lq * i_q
    v_q = m.R_s * i_q + w_e * m.Ld0 * i_d + w_e * m.lambda_m0
    stator, rotor, copper, mech = loss_arrays(m, np.broadcast_to(w[:, None], shape), i_d, i_q)
    p_out = w[:, None] * t[None, :]
    total = stator + rotor + copper + mech
    with np.errstate(invalid="ignore", divide="ignore"):
        eta = np.where(p_out > 0, p_out / (p_out + total), 0.0)
    nan = np.nan
    return TorqueSpeedMap(
        speed_axis=w, torque_axis=t, feasible=ok,
        gamma=np.where(ok, np.degrees(g), nan), i_s=np.where(ok, i_s, nan),
        i_d=np.where(ok, i_d, nan), i_q=np.where(ok, i_q, nan),
        v_d=np.where(ok, v_d, nan), v_q=np.where(ok, v_q, nan), eta=np.where(ok, eta, nan),
    )


def default_torque_axis(t_max: float = 212.0, step: float = 5.0) -> np.ndarray:
    return np.arange(0.0, t_max + 1e-9, step)


@dataclass
class TpcaReport:
    low: float
    accelerating: float
    high: float
    speeds: dict = field(default_factory=dict)  # region -> speed where the max ratio occurred

    @property
    def total(self) -> float:
        return self.low + self.accelerating + self.high

    def to_dict(self) -> dict:
        return {"low": self.low, "accelerating": self.accelerating, "high": self.high, "total": self.total}


def tpca(tsm: TorqueSpeedMap, regions=TPCA_REGIONS) -> TpcaReport:
    """Region-wise max of (max feasible torque at a speed) / (its commutation angle in degrees)."""
    if tsm.feasible.size == 0:
        raise ValueError("empty map")
    values, where = {}, {}
    last = len(regions) - 1
    for k, (name, lo, hi) in enumerate(regions):
        w = tsm.speed_axis
        in_region = (w >= lo) & ((w <= hi) if k == last else (w < hi))
        best, best_w = 0.0, math.nan
        for i in np.flatnonzero(in_region):
            cols = np.flatnonzero(tsm.feasible[i])
            if cols.size == 0:
                continue
            t_top = tsm.torque_axis[cols].max()
            at_top = cols[tsm.torque_axis[cols] == t_top]
            gam = tsm.gamma[i, at_top].min()
            if not gam > 0:
                continue
            ratio = t_top / gam
            if ratio > best:
                best, best_w = float(ratio), float(w[i])
        if math.isnan(best_w):
            warnings.warn(f"TPCA region '{name}' has no feasible cell with gamma > 0", stacklevel=2)
        values[name] = best
        where[name] = best_w
    return TpcaReport(low=values["low"], accelerating=values["accelerating"], high=values["high"], speeds=where)


def _point_coords(pt):
    if isinstance(pt, OperatingPoint):
        return pt.omega_mech, pt.T_e
    w, t = pt[0], pt[1]
    return float(w), float(t)


def premium_region_stats(tsm: TorqueSpeedMap, points=(), threshold: float = PREMIUM_THRESHOLD) -> dict:
    if tsm.feasible.size == 0 or not tsm.feasible.any():
        raise ValueError("map has no feasible cells")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    premium = tsm.feasible & (np.nan_to_num(tsm.eta, nan=-1.0) >= threshold)
    area = float(premium.sum() / tsm.feasible.sum())
    count = 0
    for pt in points:
        i, j = tsm.nearest(*_point_coords(pt))
        count += bool(premium[i, j])
    return {"area_fraction": area, "count_in_premium": int(count)}


@dataclass
class ConstantTorqueCurves:
    currents: np.ndarray
    gamma_deg: np.ndarray
    torque: np.ndarray  # (n_currents, n_gamma)
    locus_gamma_deg: np.ndarray
    locus_torque: np.ndarray


def current_ladder(I_m: float, step: float = 31.2) -> np.ndarray:
    return np.arange(step, I_m + 1e-9, step)


def constant_torque_trajectories(m: MachineParams, currents, step_deg: float = 0.5) -> ConstantTorqueCurves:
    currents = np.asarray(currents, dtype=float)
    if np.any(currents <= 0):
        raise ValueError("currents must be positive")
    mp = m.packed()
    gam = np.arange(0.0, 90.0 + 1e-9, step_deg)
    g_rad = np.radians(gam)
    i_d = -currents[:, None] * np.sin(g_rad)[None, :]
    i_q = currents[:, None] * np.cos(g_rad)[None, :]
    torque_grid = np.vectorize(lambda d, q: _dq.torque_dq(mp, d, q))(i_d, i_q)
    loc_g = np.empty(currents.size)
    loc_t = np.empty(currents.size)
    for k, i in enumerate(currents):
        t, g = _dq.max_torque_at_current(mp, float(i))
        loc_g[k] = math.degrees(g)
        loc_t[k] = t
    return ConstantTorqueCurves(currents, gam, torque_grid, loc_g, loc_t)
