"""Backward-facing vehicle model: drive-cycle operating points and drivability limits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .motor import MachineParams

SCAN_POINTS = 2000
A_TOL = 1e-10  # m/s^2
THETA_TOL = 1e-10  # rad
CYCLE_HEADER = "t_s,v_mps"
POINTS_HEADER = "t_s,omega_mech_rad_s,torque_Nm,feasible"


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleParams:
    m0: float = 1805.0
    m1: float = 500.0
    m_app: float = 90.0
    R_w: float = 0.381
    C_d: float = 0.25
    A: float = 2.0
    C_r: float = 0.015
    L: float = 2.7
    a_front: float = 1.3
    H_CG: float = 0.5
    G_r: float = 8.0
    eta_trans: float = 0.97
    mu_max: float = 10.0
    T_m_max: float = 210.0
    rho_air: float = 1.225
    g: float = 9.81
    K: float = 6.5e-6  # s^2/m^2, speed-dependent rolling term
    speed_term: str = "drag"  # "drag": 1/2 rho C_d A v^2, "rolling_k": (m0+m1) g K v^2

    def __post_init__(self):
        for name in ("m0", "R_w", "L", "a_front", "G_r", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("m1", "m_app", "C_d", "A", "C_r", "H_CG", "mu_max", "T_m_max", "rho_air", "K"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.eta_trans <= 1:
            raise ValueError("eta_trans must lie in (0, 1]")
        if not 0 < self.a_front < self.L:
            raise ValueError("need 0 < a_front < L")
        if self.speed_term not in ("drag", "rolling_k"):
            raise ValueError("speed_term must be 'drag' or 'rolling_k'")

    @property
    def mass(self) -> float:
        return self.m0 + self.m1

    @property
    def inertial_mass(self) -> float:
        return self.m0 + self.m_app + self.m1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "VehicleParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown vehicle fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def tractive_force(vp: VehicleParams, v: float, a: float) -> float:
    rolling = vp.C_r * vp.mass * vp.g
    if vp.speed_term == "drag":
        speed = 0.5 * vp.rho_air * vp.C_d * vp.A * v * v
    else:
        speed = vp.mass * vp.g * vp.K * v * v
    return vp.inertial_mass * a + rolling + speed


def wheel_torque_demand(vp: VehicleParams, v: float, a: float) -> float:
    """Torque per motor (two identical motors); zero while braking."""
    if v < 0:
        raise ValueError("v must be >= 0")
    f_t = tractive_force(vp, v, a)
    if f_t < 0:
        return 0.0
    return 0.5 * f_t * vp.R_w / (vp.eta_trans * vp.G_r)


@dataclass(frozen=True)
class DriveCycle:
    t: np.ndarray
    v: np.ndarray
    name: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("t and v must be 1-D and of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("v must be finite and >= 0")

    def __len__(self):
        return self.t.size

    @classmethod
    def from_csv(cls, source, name: str = "") -> "DriveCycle":
        """Read a ``t_s,v_mps`` CSV; problems raise IngestionError naming the line."""
        try:
            if isinstance(source, str) and "\n" in source:
                text = source
            else:
                with open(source, newline="") as fh:
                    text = fh.read()
        except OSError as exc:
            raise IngestionError(f"cannot read drive cycle: {exc}") from exc
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != CYCLE_HEADER.split(","):
            raise IngestionError(f"line 1: header must be '{CYCLE_HEADER}'")
        t, v = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise IngestionError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                ti, vi = float(row[0]), float(row[1])
            except ValueError as exc:
                raise IngestionError(f"line {lineno}: {exc}") from exc
            if not (math.isfinite(ti) and math.isfinite(vi)) or vi < 0:
                raise IngestionError(f"line {lineno}: speed must be finite and >= 0")
            if t and ti <= t[-1]:
                raise IngestionError(f"line {lineno}: time must increase")
            t.append(ti)
            v.append(vi)
        return cls(np.array(t), np.array(v), name)

    def to_csv(self, path=None) -> str:
        lines = [CYCLE_HEADER] + [f"{a:.9g},{b:.9g}" for a, b in zip(self.t, self.v)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class CyclePoint:
    t: float
    omega_mech: float
    torque: float
    feasible: bool
    v: float
    a: float


def cycle_operating_points(vp: VehicleParams, m: MachineParams | None, cycle: DriveCycle) -> list[CyclePoint]:
    """One machine point per sample interval, taken at the interval start.

    Acceleration is the forward difference over the interval. A point is
    flagged infeasible when it needs more torque than the machine reaches at
    that speed (skipped when ``m`` is None).
    """
    if len(cycle) < 2:
        raise ValueError("drive cycle needs at least 2 samples")
    from .trajectory import max_torque_at_speed

    out = []
    for i in range(len(cycle) - 1):
        dt = cycle.t[i + 1] - cycle.t[i]
        a = (cycle.v[i + 1] - cycle.v[i]) / dt
        v = float(cycle.v[i])
        w = v * vp.G_r / vp.R_w
        torque = wheel_torque_demand(vp, v, a)
        ok = True
        if m is not None:
            ok = torque <= max_torque_at_speed(m, w) * (1 + 1e-9)
        out.append(CyclePoint(float(cycle.t[i]), w, torque, bool(ok), v, float(a)))
    return out


def points_csv(points, path=None) -> str:
    lines = [POINTS_HEADER] + [f"{p.t:.9g},{p.omega_mech:.9g},{p.torque:.9g},{int(p.feasible)}" for p in points]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def axle_loads(vp: VehicleParams, a: float):
    """Front and rear normal loads under longitudinal acceleration ``a`` (clipped at 0)."""
    w = vp.mass * vp.g
    shift = vp.mass * a * vp.H_CG / vp.L
    f = w * (vp.L - vp.a_front) / vp.L - shift
    r = w * vp.a_front / vp.L + shift
    return max(f, 0.0), max(r, 0.0)


def slope_axle_loads(vp: VehicleParams, theta: float):
    """Front and rear normal loads standing on a slope ``theta`` (rad), climbing forwards."""
    w = vp.mass * vp.g
    c, s = math.cos(theta), math.sin(theta)
    f = w * (c * (vp.L - vp.a_front) - s * vp.H_CG) / vp.L
    r = w * (c * vp.a_front + s * vp.H_CG) / vp.L
    return max(f, 0.0), max(r, 0.0)


def _axle_torque_cap(vp, f_z):
    """Largest per-motor torque the axle can transmit: motor cap or friction limit."""
    return min(vp.T_m_max, vp.mu_max * f_z * vp.R_w / (vp.G_r * vp.eta_trans))


def _accel_from_torque(vp, t_sum):
    return (t_sum * vp.G_r * vp.eta_trans - vp.C_r * vp.mass * vp.g * vp.R_w) / (vp.inertial_mass * vp.R_w)


def available_acceleration(vp: VehicleParams, a: float) -> float:
    f, r = axle_loads(vp, a)
    return _accel_from_torque(vp, _axle_torque_cap(vp, f) + _axle_torque_cap(vp, r))


def _last_true(pred, lo, hi, tol, n=SCAN_POINTS):
    """Largest x in [lo, hi] with pred(x) true, assuming pred(lo); scan then bisect."""
    xs = np.linspace(lo, hi, n + 1)
    last = 0
    for k in range(1, xs.size):
        if pred(xs[k]):
            last = k
    if last == xs.size - 1:
        return float(hi)
    a, b = xs[last], xs[last + 1]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if pred(mid):
            a = mid
        else:
            b = mid
    return float(a)


def max_acceleration(vp: VehicleParams) -> float:
    """Largest a with a <= A(a), A being the acceleration the axle-limited torques give at a.

    Returns 0.0 when no positive acceleration is attainable.
    """
    if available_acceleration(vp, 0.0) <= 0:
        return 0.0
    a_hi = max(_accel_from_torque(vp, 2.0 * vp.T_m_max), 0.0) * 1.000001 + A_TOL
    return _last_true(lambda a: a <= available_acceleration(vp, a), 0.0, a_hi, A_TOL)


def _grade_ok(vp, theta):
    f, r = slope_axle_loads(vp, theta)
    supply = (_axle_torque_cap(vp, f) + _axle_torque_cap(vp, r)) * vp.G_r * vp.eta_trans / vp.R_w
    need = vp.mass * vp.g * (math.sin(theta) + vp.C_r * math.cos(theta))
    return supply >= need


def max_gradient(vp: VehicleParams) -> float:
    """Steepest climbable slope in degrees at crawl speed and zero acceleration."""
    if not _grade_ok(vp, 0.0):
        return 0.0
    return math.degrees(_last_true(lambda th: _grade_ok(vp, th), 0.0, 0.5 * math.pi, THETA_TOL))


def drivability(vp: VehicleParams) -> dict:
    return {"a_x_max": max_acceleration(vp), "theta_max_deg": max_gradient(vp)}
