"""Analytical IPMSM evaluator.

Desk-scale replacement for field solutions: steady-state dq equations,
torque and its commutation-angle gradient, magnet volume, losses and a
closed-form magnetic-circuit map from magnet geometry to machine parameters.

Angles are exposed in degrees, speeds in mechanical rad/s unless a name says
``omega_e``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .kernels import dq as _dq

MU_0 = 4e-7 * math.pi

DESIGN_FIELDS = ("W_m", "T_m", "L_m", "W_w1", "W_g", "alpha_m1", "alpha_m2", "alpha_m3")

# Rotor 2 & 3 ranges for W_w1, T_m, L_m, W_m. W_g and the cavity arcs have no
# tabulated range, so these are configuration defaults.
DEFAULT_BOUNDS = {
    "W_m": (14.0, 25.0),
    "T_m": (2.0, 7.16),
    "L_m": (45.0, 50.0),
    "W_w1": (0.2, 1.2),
    "W_g": (0.5, 3.0),
    "alpha_m1": (30.0, 42.0),
    "alpha_m2": (30.0, 42.0),
    "alpha_m3": (30.0, 42.0),
}

DEFAULT_NOISE = {name: 0.0 for name in DESIGN_FIELDS}

REFERENCE_VOLUME_PER_POLE = 12.802  # cm^3, two blocks per pole


class DomainError(ValueError):
    """An argument lies outside the operation's mathematical domain."""


@dataclass(frozen=True)
class LossCoeffs:
    k_h_stator: float = 60.0
    k_e_stator: float = 0.35
    k_h_rotor: float = 12.0
    k_e_rotor: float = 0.06
    k_mech: float = 5.5e-4

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss coefficient {f.name} must be >= 0")


@dataclass(frozen=True)
class MachineParams:
    """Electrical model of one IPMSM.

    ``p`` is the pole-pair count. ``sat_iq`` feeds the optional q-axis
    saturation law ``Lq = Lq0 / (1 + |i_q| / sat_iq)``, active only when
    ``saturation`` is set.
    """

    R_s: float
    p: int
    lambda_m0: float
    Ld0: float
    Lq0: float
    sat_iq: float
    I_m: float
    V_m: float
    loss_coeffs: LossCoeffs = field(default_factory=LossCoeffs)
    saturation: bool = False

    def __post_init__(self):
        if not self.R_s > 0:
            raise ValueError("R_s must be > 0")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("p must be an integer >= 1")
        if not (self.Lq0 >= self.Ld0 > 0):
            raise ValueError("need Lq0 >= Ld0 > 0")
        if not (self.I_m > 0 and self.V_m > 0):
            raise ValueError("I_m and V_m must be > 0")
        if self.lambda_m0 < 0:
            raise ValueError("lambda_m0 must be >= 0")
        if self.saturation and not self.sat_iq > 0:
            raise ValueError("saturation needs sat_iq > 0")

    def packed(self) -> np.ndarray:
        sat = self.sat_iq if self.saturation else 0.0
        return _dq.pack(self.R_s, self.p, self.lambda_m0, self.Ld0, self.Lq0, sat, self.I_m, self.V_m)

    def Lq(self, i_q: float) -> float:
        return float(_dq.lq_eff(self.packed(), float(i_q)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> MachineParams:
        data = dict(data)
        data["loss_coeffs"] = LossCoeffs(**data.get("loss_coeffs", {}))
        return cls(**data)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> MachineParams:
        return cls.from_dict(_load_json(source))


REFERENCE_MACHINE = MachineParams(
    R_s=0.1143,
    p=4,
    lambda_m0=0.1165,
    Ld0=0.45e-3,
    Lq0=1.31e-3,
    sat_iq=400.0,
    I_m=200.0,
    V_m=600.0 / math.sqrt(3.0),
)


@dataclass(frozen=True)
class DesignVector:
    """The eight controllable magnet-sizing variables (mm, mechanical degrees)."""

    W_m: float
    T_m: float
    L_m: float
    W_w1: float
    W_g: float
    alpha_m1: float
    alpha_m2: float
    alpha_m3: float
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS), compare=False)
    noise: dict = field(default_factory=lambda: dict(DEFAULT_NOISE), compare=False)

    def values(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in DESIGN_FIELDS], dtype=float)

    def lower(self) -> np.ndarray:
        return np.array([self.bounds[n][0] for n in DESIGN_FIELDS], dtype=float)

    def upper(self) -> np.ndarray:
        return np.array([self.bounds[n][1] for n in DESIGN_FIELDS], dtype=float)

    def noise_std(self) -> np.ndarray:
        return np.array([self.noise.get(n, 0.0) for n in DESIGN_FIELDS], dtype=float)

    def in_bounds(self) -> bool:
        x = self.values()
        return bool(np.all(np.isfinite(x)) and np.all(x >= self.lower()) and np.all(x <= self.upper()))

    def with_values(self, x) -> DesignVector:
        return replace(self, **{n: float(v) for n, v in zip(DESIGN_FIELDS, x)})

    def normalized(self) -> np.ndarray:
        lo, hi = self.lower(), self.upper()
        return (self.values() - lo) / (hi - lo)

    def from_unit(self, u) -> DesignVector:
        lo, hi = self.lower(), self.upper()
        return self.with_values(lo + np.asarray(u, dtype=float) * (hi - lo))

    def to_dict(self) -> dict:
        d = {n: getattr(self, n) for n in DESIGN_FIELDS}
        d["bounds"] = {k: list(v) for k, v in self.bounds.items()}
        d["noise"] = dict(self.noise)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> DesignVector:
        data = dict(data)
        bounds = dict(DEFAULT_BOUNDS)
        bounds.update({k: tuple(v) for k, v in data.pop("bounds", {}).items()})
        noise = dict(DEFAULT_NOISE)
        noise.update(data.pop("noise", {}))
        return cls(bounds=bounds, noise=noise, **data)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> DesignVector:
        return cls.from_dict(_load_json(source))


REFERENCE_DESIGN = DesignVector(
    W_m=17.88, T_m=7.16, L_m=50.0, W_w1=0.7, W_g=2.0, alpha_m1=36.15, alpha_m2=35.94, alpha_m3=36.05
)


@dataclass(frozen=True)
class OperatingPoint:
    omega_mech: float
    T_e: float
    i_s: float
    gamma: float
    i_d: float
    i_q: float
    v_d: float
    v_q: float
    eta: float = math.nan
    feasible: bool = True
    max_torque: float = math.nan


@dataclass(frozen=True)
class Losses:
    stator_core: float
    rotor_core: float
    copper: float
    mechanical: float

    @property
    def total(self) -> float:
        return self.stator_core + self.rotor_core + self.copper + self.mechanical


def _load_json(source) -> dict:
    if isinstance(source, dict):
        return source
    text = str(source)
    if text.lstrip().startswith("{"):
        return json.loads(text)
    return json.loads(Path(source).read_text())


def dq_currents(i_s: float, gamma: float) -> tuple[float, float]:
    if i_s < 0:
        raise DomainError("i_s must be >= 0")
    if not 0.0 <= gamma <= 90.0:
        raise DomainError(f"gamma={gamma} deg outside [0, 90]")
    g = math.radians(gamma)
    return -i_s * math.sin(g), i_s * math.cos(g)


def dq_voltages(m: MachineParams, i_d: float, i_q: float, omega_e: float) -> tuple[float, float]:
    v_d, v_q = _dq.voltages_dq(m.packed(), float(i_d), float(i_q), float(omega_e))
    return float(v_d), float(v_q)


def torque(m: MachineParams, i_d: float, i_q: float) -> float:
    return float(_dq.torque_dq(m.packed(), float(i_d), float(i_q)))


def torque_gamma_gradient(m: MachineParams, i_s: float, gamma: float) -> float:
    """dT_e/dgamma in N*m per radian; gamma given in degrees.

    Parameter partials come from the saturation law only; the constant-parameter
    machine has none.
    """
    dq_currents(i_s, gamma)  # domain check
    return float(_dq.torque_gamma_gradient(m.packed(), float(i_s), math.radians(gamma)))


def magnet_volume(d: DesignVector, blocks_per_pole: int = 1) -> float:
    """Magnet volume per pole in cm^3."""
    if blocks_per_pole not in (1, 2):
        raise DomainError("blocks_per_pole must be 1 or 2")
    return blocks_per_pole * d.W_m * d.T_m * d.L_m / 1000.0


# magnetic-circuit map constants
G_EQ = 2.2  # equivalent airgap seen by the magnet, mm
K_LD_ARC = 0.3
K_LD_WIN = 0.05
K_LQ_ARC = 0.4
K_LQ_WIN = -0.03


def pm_flux_linkage(W_m: float, T_m: float, L_m: float, ref: DesignVector = REFERENCE_DESIGN,
                    lambda_ref: float = REFERENCE_MACHINE.lambda_m0) -> float:
    """lambda_m from magnet face area and a thickness/(thickness + gap) divider."""
    area = (W_m * L_m) / (ref.W_m * ref.L_m)
    divider = (T_m / (T_m + G_EQ)) / (ref.T_m / (ref.T_m + G_EQ))
    return lambda_ref * area * divider


def _inductances(d: DesignVector, ref: DesignVector, machine: MachineParams) -> tuple[float, float]:
    arc = (d.alpha_m1 + d.alpha_m2 + d.alpha_m3) / 3.0
    arc_ref = (ref.alpha_m1 + ref.alpha_m2 + ref.alpha_m3) / 3.0
    d_arc = (arc - arc_ref) / arc_ref
    d_win = d.W_w1 - ref.W_w1
    ld = machine.Ld0 * (1.0 - K_LD_ARC * d_arc + K_LD_WIN * d_win)
    lq = machine.Lq0 * (1.0 + K_LQ_ARC * d_arc + K_LQ_WIN * d_win)
    return ld, lq


def evaluate_design(d: DesignVector, noise_draw=None, ref: DesignVector = REFERENCE_DESIGN,
                    machine: MachineParams = REFERENCE_MACHINE) -> MachineParams | None:
    """Map magnet geometry to machine parameters, or ``None`` when infeasible.

    ``noise_draw`` holds additive per-field offsets (same order as the design
    fields); the perturbed design is clamped back into the bounds.
    """
    if not d.in_bounds():
        return None
    if noise_draw is not None:
        x = np.clip(d.values() + np.asarray(noise_draw, dtype=float), d.lower(), d.upper())
        if not np.all(np.isfinite(x)):
            return None
        d = d.with_values(x)
    lam = pm_flux_linkage(d.W_m, d.T_m, d.L_m, ref, machine.lambda_m0)
    ld, lq = _inductances(d, ref, machine)
    return replace(machine, lambda_m0=lam, Ld0=ld, Lq0=lq)


def draw_noise(d: DesignVector, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, 1.0, len(DESIGN_FIELDS)) * d.noise_std()


def loss_model(m: MachineParams, op: OperatingPoint) -> Losses:
    return Losses(*(float(v) for v in loss_arrays(m, op.omega_mech, op.i_d, op.i_q)))


def loss_arrays(m: MachineParams, omega_mech, i_d, i_q):
    """Vectorised loss model: (stator_core, rotor_core, copper, mechanical) in W."""
    omega_mech = np.asarray(omega_mech, dtype=float)
    i_d = np.asarray(i_d, dtype=float)
    i_q = np.asarray(i_q, dtype=float)
    c = m.loss_coeffs
    f_e = np.abs(m.p * omega_mech) / (2.0 * math.pi)
    flux_sq = (m.lambda_m0 + m.Ld0 * i_d) ** 2
    stator = (c.k_h_stator * f_e + c.k_e_stator * f_e**2) * flux_sq
    rotor = (c.k_h_rotor * f_e + c.k_e_rotor * f_e**2) * flux_sq
    copper = 1.5 * m.R_s * (i_d**2 + i_q**2)
    mech = c.k_mech * omega_mech**2
    return stator, rotor, copper, mech


def efficiency(losses: Losses | float, P_out: float) -> float:
    if P_out < 0:
        raise DomainError("P_out must be >= 0")
    total = losses.total if isinstance(losses, Losses) else float(losses)
    if P_out == 0:
        return 0.0
    return P_out / (P_out + total)


def radial_force_density(B_r: float) -> float:
    return B_r * B_r / (2.0 * MU_0)


def demag_ratio(B_r1: float, B_r2: float) -> float:
    if B_r1 <= 0:
        raise DomainError("B_r1 must be > 0")
    if not 0 <= B_r2 <= B_r1:
        raise DomainError("need 0 <= B_r2 <= B_r1")
    return 1.0 - B_r2 / B_r1
