"""Command-line front end: ``mlhr-opt <sample|optimize|map|drive> --config PATH``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OPTIMIZER = 3
EXIT_MAP = 4
EXIT_INGEST = 5

LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("mlhr_opt")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def fmt(v) -> str:
    return f"{float(v):.9g}"


def _round(obj):
    """Floats to 9 significant digits, recursively, so JSON output is stable."""
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_round(obj), indent=2, sort_keys=True) + "\n")


def bundled(name: str) -> Path:
    return Path(str(resources.files("mlhr_opt") / "data" / name))


class Config:
    def __init__(self, path: Path, data: dict):
        self.path = path
        self.base = path.parent
        self.data = data

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise CliError(EXIT_CONFIG, f"config file not found: {path}")
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_CONFIG, f"cannot parse config {path}: {exc}")
        if not isinstance(data, dict):
            raise CliError(EXIT_CONFIG, "config must be a JSON object")
        return cls(path, data)

    def section(self, name: str) -> dict:
        sec = self.data.get(name, {})
        if not isinstance(sec, dict):
            raise CliError(EXIT_CONFIG, f"'{name}' must be an object")
        return sec

    def resolve(self, p) -> Path:
        """Paths are relative to the config file; ``bundled:NAME`` points into the package data."""
        p = str(p)
        if p.startswith("bundled:"):
            return bundled(p.split(":", 1)[1])
        q = Path(p)
        return q if q.is_absolute() else self.base / q

    def machine(self):
        from .motor import REFERENCE_MACHINE, DesignVector, MachineParams, evaluate_design

        spec = self.data.get("machine")
        try:
            if spec is None:
                m = REFERENCE_MACHINE
            elif isinstance(spec, str):
                src = self.resolve(spec)
                if not src.exists():
                    raise CliError(EXIT_CONFIG, f"machine file not found: {src}")
                m = MachineParams.from_json(src)
            else:
                m = MachineParams.from_dict(spec)
            design = self.data.get("design")
            if design is not None:
                d = DesignVector.from_json(self.resolve(design)) if isinstance(design, str) else \
                    DesignVector.from_dict(design)
                m = evaluate_design(d, machine=m)
                if m is None:
                    raise CliError(EXIT_CONFIG, "design lies outside its bounds")
            return m
        except CliError:
            raise
        except (ValueError, KeyError, TypeError, OSError) as exc:
            raise CliError(EXIT_CONFIG, f"bad machine specification: {exc}")


def _axis(spec, default):
    if spec is None:
        return np.asarray(default, dtype=float)
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if isinstance(spec, dict):
        if "step" in spec:
            return np.arange(float(spec.get("start", 0.0)), float(spec["stop"]) + 1e-9, float(spec["step"]))
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    raise ValueError("axis must be a list or {start, stop, step|num}")


def _seed(args, cfg: Config):
    seed = args.seed if args.seed is not None else cfg.data.get("seed")
    if seed is None:
        raise CliError(EXIT_CONFIG, "a seed is required (--seed or 'seed' in the config)")
    try:
        return int(seed)
    except (TypeError, ValueError):
        raise CliError(EXIT_CONFIG, f"seed must be an integer, got {seed!r}")


def _out_dir(args, cfg: Config) -> Path:
    out = Path(args.out) if args.out else cfg.resolve(cfg.data.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands

def cmd_sample(args, cfg: Config) -> int:
    from .sampling.dataset import Dataset
    from .sampling.lhs import lhs_init, lhs_optimize, phi_p

    sec = cfg.section("sample")
    seed = _seed(args, cfg)
    n, dims = int(sec.get("n", 100)), int(sec.get("dims", 8))
    if n < 2:
        raise CliError(EXIT_CONFIG, "need n >= 2")
    if dims < 1:
        raise CliError(EXIT_CONFIG, "need dims >= 1")
    iters = int(sec.get("iterations", 500))
    p, t = float(sec.get("p", 50.0)), float(sec.get("t", 1.0))
    rng = np.random.default_rng(seed)
    X0 = lhs_init(n, dims, rng)
    X1 = lhs_optimize(X0, iters, rng, p=p, t=t)
    before, after = phi_p(X0, p, t), phi_p(X1, p, t)
    out = _out_dir(args, cfg)
    Dataset(X1, np.zeros((n, 0)), None).to_csv(out / "samples.csv", digits=9)
    print(f"phi_p before: {fmt(before)}")
    print(f"phi_p after: {fmt(after)}")
    return EXIT_OK


def _problem(sec):
    from .optimizer import problems

    name = sec.get("problem", "zdt1")
    if name == "zdt1":
        return problems.zdt1(int(sec.get("n_var", 8)))
    if name == "bowl":
        return problems.bowl(int(sec.get("n_var", 2)))
    if name == "magnet":
        return problems.magnet_problem()
    raise CliError(EXIT_CONFIG, f"unknown problem '{name}'")


def cmd_optimize(args, cfg: Config) -> int:
    from .optimizer.nsga2 import Nsga2Config, OptimizerError, nsga2_run

    sec = cfg.section("optimize")
    seed = _seed(args, cfg)
    problem = _problem(sec)
    sampler = sec.get("sampler", "plain")
    samplers = ["plain", "mlhr"] if sampler == "both" else [sampler]
    if any(s not in ("plain", "mlhr") for s in samplers):
        raise CliError(EXIT_CONFIG, f"unknown sampler '{sampler}'")
    try:
        base = Nsga2Config.from_dict({**sec.get("nsga2", {}), "seed": seed})
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"bad nsga2 settings: {exc}")
    fraction = float(sec.get("target_fraction", 0.95))
    mlhr_max_gen = int(sec.get("mlhr_max_generations", base.max_generations))
    out = _out_dir(args, cfg)
    workers = max(1, int(args.workers))
    results = {}
    target = None
    for s in samplers:
        cfg_s = base
        if s == "mlhr" and target is not None:
            from dataclasses import replace

            cfg_s = replace(base, target_hv=target, max_generations=mlhr_max_gen)
        elif s == "mlhr":
            from dataclasses import replace

            cfg_s = replace(base, max_generations=mlhr_max_gen)
        try:
            res = nsga2_run(problem, cfg_s, sampler=s, workers=workers)
        except OptimizerError as exc:
            if exc.partial is not None:
                exc.partial.history_csv(out / f"history_{s}.csv")
            raise CliError(EXIT_OPTIMIZER, str(exc))
        results[s] = res
        res.front.to_json(out / f"front_{s}.json")
        res.history_csv(out / f"history_{s}.csv")
        if s == "plain" or target is None:
            target = fraction * res.history[-1].hypervolume
    lines = ["sampler,generations_to_target,true_evals"]
    for s, res in results.items():
        g = res.generations_to_reach(target)
        e = res.evals_to_reach(target)
        lines.append(f"{s},{'' if g is None else g},{'' if e is None else e}")
        print(f"{s}: generations_to_target={'' if g is None else g}, true_evals={'' if e is None else e}")
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _map_axes(sec):
    from .trajectory import default_torque_axis

    try:
        w = _axis(sec.get("speed_axis"), np.linspace(10.0, 1000.0, 100))
        t = _axis(sec.get("torque_axis"), default_torque_axis())
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(EXIT_CONFIG, f"bad map axes: {exc}")
    return w, t


def _build_map(m, sec, workers):
    from .trajectory import build_map

    w, t = _map_axes(sec)
    try:
        return build_map(m, w, t, workers=workers, field_weakening=bool(sec.get("field_weakening", True)))
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"bad map axes: {exc}")


def cmd_map(args, cfg: Config) -> int:
    import warnings

    from .trajectory import premium_region_stats, tpca

    sec = cfg.section("map")
    m = cfg.machine()
    threshold = float(sec.get("threshold", 0.94))
    if not 0.0 <= threshold <= 1.0:
        raise CliError(EXIT_CONFIG, "threshold must lie in [0, 1]")
    tsm = _build_map(m, sec, max(1, int(args.workers)))
    if not tsm.feasible.any():
        raise CliError(EXIT_MAP, "map has no feasible cell")
    out = _out_dir(args, cfg)
    tsm.to_csv(out / "map.csv")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = tpca(tsm)
    for wmsg in caught:
        log.warning("%s", wmsg.message)
    write_json(out / "tpca.json", rep.to_dict())
    stats = premium_region_stats(tsm, [], threshold)
    write_json(out / "premium.json", {"threshold": threshold, **stats})
    print(f"tpca total: {fmt(rep.total)}")
    print(f"premium area fraction: {fmt(stats['area_fraction'])}")
    return EXIT_OK


def cmd_drive(args, cfg: Config) -> int:
    from .trajectory import premium_region_stats
    from .vehicle import DriveCycle, IngestionError, VehicleParams, cycle_operating_points, drivability, points_csv

    sec = cfg.section("drive")
    try:
        vp = VehicleParams.from_dict(cfg.section("vehicle"))
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"bad vehicle parameters: {exc}")
    cycles = sec.get("cycles", ["bundled:triangle.csv"])
    if isinstance(cycles, str):
        cycles = [cycles]
    loaded = []
    for c in cycles:
        path = cfg.resolve(c)
        if not path.exists():
            raise CliError(EXIT_INGEST, f"drive cycle not found: {path}")
        try:
            loaded.append((path.stem, DriveCycle.from_csv(path, path.stem)))
        except IngestionError as exc:
            raise CliError(EXIT_INGEST, f"{path}: {exc}")
        except ValueError as exc:
            raise CliError(EXIT_INGEST, f"{path}: {exc}")
    m = cfg.machine()
    threshold = float(sec.get("threshold", 0.94))
    map_sec = {**cfg.section("map"), **sec.get("map", {})}
    tsm = _build_map(m, map_sec, max(1, int(args.workers)))
    if not tsm.feasible.any():
        raise CliError(EXIT_MAP, "map has no feasible cell")
    out = _out_dir(args, cfg)
    summary = {"vehicle": drivability(vp), "threshold": threshold, "cycles": {}}
    for name, cyc in loaded:
        try:
            pts = cycle_operating_points(vp, m, cyc)
        except ValueError as exc:
            raise CliError(EXIT_INGEST, f"{name}: {exc}")
        points_csv(pts, out / f"points_{name}.csv")
        coords = [(p.omega_mech, p.torque) for p in pts if p.feasible]
        stats = premium_region_stats(tsm, coords, threshold)
        summary["cycles"][name] = {"points": len(pts), "feasible": len(coords),
                                   "in_premium": stats["count_in_premium"]}
    write_json(out / "drivability.json", summary)
    print(f"a_x_max: {fmt(summary['vehicle']['a_x_max'])} m/s^2")
    print(f"theta_max: {fmt(summary['vehicle']['theta_max_deg'])} deg")
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "optimize": cmd_optimize, "map": cmd_map, "drive": cmd_drive}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlhr-opt", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="output directory (default: config 'out' or ./out)")
    return ap


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("MLHR_OPT_LOG", "quiet").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = Config.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
