"""Optimization problems: synthetic fixtures and the magnet-sizing problem."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..motor import DESIGN_FIELDS, REFERENCE_DESIGN, REFERENCE_MACHINE, DesignVector, evaluate_design, magnet_volume


@dataclass
class Problem:
    name: str
    lower: np.ndarray
    upper: np.ndarray
    n_obj: int
    n_con: int
    evaluate: Callable  # physical x -> (objectives, violations >= 0)
    ref_point: np.ndarray

    @property
    def n_var(self) -> int:
        return self.lower.size

    def response(self, x) -> np.ndarray:
        """Objectives followed by constraint violations, as one row."""
        f, g = self.evaluate(np.asarray(x, dtype=float))
        return np.concatenate([np.asarray(f, float).reshape(-1), np.asarray(g, float).reshape(-1)])


def zdt1(n_var: int = 8) -> Problem:
    """Two objectives, convex front f2 = 1 - sqrt(f1) reached with x_2..x_n = 0."""

    def ev(x):
        f1 = x[0]
        g = 1.0 + 9.0 * np.mean(x[1:])
        return np.array([f1, g * (1.0 - math.sqrt(f1 / g))]), np.zeros(0)

    return Problem("zdt1", np.zeros(n_var), np.ones(n_var), 2, 0, ev, np.array([1.1, 1.1]))


def zdt1_optimal_hypervolume(ref=(1.1, 1.1)) -> float:
    """Hypervolume of the exact ZDT1 front f2 = 1 - sqrt(f1) for a reference point >= (1, 1)."""
    r1, r2 = ref
    if r1 < 1.0 or r2 < 1.0:
        raise ValueError("reference point must be >= (1, 1)")
    # the front removes 1/3 of the unit square; everything else up to ref is dominated
    return r1 * r2 - 1.0 / 3.0


def bowl(n_var: int = 2, center: float = 0.3) -> Problem:
    """Single-objective convex bowl with minimum 0 at x = center."""

    def ev(x):
        return np.array([float(np.sum((x - center) ** 2))]), np.zeros(0)

    return Problem("bowl", np.zeros(n_var), np.ones(n_var), 1, 0, ev, np.array([float(n_var)]))


@dataclass(frozen=True)
class Baseline:
    V_pm_old: float  # magnet volume per pole of the reference design, cm^3
    A_eta0: float  # premium-efficiency area fraction of the reference map
    TPV0: float  # peak torque per magnet volume, N·m/cm^3


def constraint_eval(candidate: dict, baseline: Baseline, delta: float = 1e-3) -> np.ndarray:
    """Violations of: V_pm below baseline, premium area kept, torque per volume kept.

    ``candidate`` needs ``V_pm``, ``A_eta`` and ``T_e``. The volume condition
    is strict, so it asks for at least a ``delta`` relative reduction.
    """
    v = float(candidate["V_pm"])
    a = float(candidate["A_eta"])
    t = float(candidate["T_e"])
    tpv = t / v if v > 0 else math.inf
    return np.array([
        max(0.0, v - baseline.V_pm_old * (1.0 - delta)),
        max(0.0, baseline.A_eta0 - a),
        max(0.0, baseline.TPV0 - tpv),
    ])


def _design_metrics(d: DesignVector, speed_axis, torque_axis, threshold):
    from ..trajectory import build_map, max_torque_at_speed, premium_region_stats

    m = evaluate_design(d, machine=REFERENCE_MACHINE)
    if m is None:
        raise ValueError("design outside its bounds")
    t_peak = max_torque_at_speed(m, 0.0)
    tsm = build_map(m, speed_axis, torque_axis)
    if not tsm.feasible.any():
        a_eta = 0.0
    else:
        a_eta = premium_region_stats(tsm, [], threshold)["area_fraction"]
    return {"V_pm": magnet_volume(d, 2), "A_eta": a_eta, "T_e": t_peak}


def magnet_problem(speed_axis=None, torque_axis=None, threshold: float = 0.94, delta: float = 1e-3,
                   template: DesignVector = REFERENCE_DESIGN) -> Problem:
    """Minimise magnet volume per pole and maximise peak torque under the baseline constraints.

    Each evaluation builds a coarse efficiency map, so the axes default to a
    small grid.
    """
    speed_axis = np.linspace(25.0, 1000.0, 12) if speed_axis is None else np.asarray(speed_axis, float)
    torque_axis = np.arange(0.0, 211.0, 15.0) if torque_axis is None else np.asarray(torque_axis, float)
    ref = _design_metrics(template, speed_axis, torque_axis, threshold)
    base = Baseline(V_pm_old=ref["V_pm"], A_eta0=ref["A_eta"], TPV0=ref["T_e"] / ref["V_pm"])

    def ev(x):
        d = template.with_values(np.clip(x, template.lower(), template.upper()))
        met = _design_metrics(d, speed_axis, torque_axis, threshold)
        return np.array([met["V_pm"], -met["T_e"]]), constraint_eval(met, base, delta)

    p = Problem("magnet", template.lower(), template.upper(), 2, 3, ev,
                np.array([1.2 * ref["V_pm"], 0.0]))
    p.baseline = base
    p.fields = DESIGN_FIELDS
    return p


PROBLEMS = {"zdt1": zdt1, "bowl": bowl, "magnet": magnet_problem}
