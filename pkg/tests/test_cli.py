import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from mlhr_opt import cli
from mlhr_opt.optimizer.problems import Problem


def write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(cmd, cfg, out, *extra):
    return cli.main([cmd, "--config", cfg, "--out", str(out), *extra])


def tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


SMALL_MAP = {"speed_axis": {"start": 50, "stop": 1000, "num": 8}, "torque_axis": {"start": 0, "stop": 212, "step": 20}}


# ---------------------------------------------------------------- sample

def test_sample_writes_csv_and_scores(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"seed": 3, "sample": {"n": 100, "dims": 8, "iterations": 200}})
    assert run("sample", cfg, tmp_path / "a") == 0
    text = capsys.readouterr().out.splitlines()
    before = float(text[0].split(":")[1])
    after = float(text[1].split(":")[1])
    assert after <= before
    rows = list(csv.reader((tmp_path / "a" / "samples.csv").open()))
    assert rows[0] == [f"x{i}" for i in range(1, 9)] and len(rows) == 101
    X = np.array(rows[1:], dtype=float)
    for col in X.T:
        assert sorted(np.floor(col * 100).astype(int)) == list(range(100))


def test_sample_rejects_single_point(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"seed": 1, "sample": {"n": 1, "dims": 2}})
    assert run("sample", cfg, tmp_path / "o") == 2
    assert "need n >= 2" in capsys.readouterr().err


def test_sample_needs_seed(tmp_path):
    cfg = write_cfg(tmp_path, {"sample": {"n": 5, "dims": 2}})
    assert run("sample", cfg, tmp_path / "o") == 2
    assert run("sample", cfg, tmp_path / "o", "--seed", "4") == 0


def test_bad_or_missing_config(tmp_path):
    assert cli.main(["sample", "--config", str(tmp_path / "none.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["sample", "--config", str(bad)]) == 2
    assert cli.main(["explode", "--config", str(bad)]) == 2


# ---------------------------------------------------------------- optimize

def opt_cfg(tmp_path, **kw):
    sec = {"problem": "zdt1", "n_var": 4, "sampler": "both",
           "nsga2": {"pop_size": 20, "max_generations": 6, "batch": 5}}
    sec.update(kw)
    return write_cfg(tmp_path, {"seed": 2, "optimize": sec})


def test_optimize_paired_outputs(tmp_path, capsys):
    assert run("optimize", opt_cfg(tmp_path), tmp_path / "o") == 0
    out = tmp_path / "o"
    for s in ("plain", "mlhr"):
        front = json.loads((out / f"front_{s}.json").read_text())
        assert front["members"]
        hist = (out / f"history_{s}.csv").read_text().splitlines()
        assert hist[0] == "generation,true_evals,hypervolume,best_cost"
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "sampler,generations_to_target,true_evals"
    assert [r.split(",")[0] for r in summary[1:]] == ["plain", "mlhr"]
    assert "generations_to_target" in capsys.readouterr().out


def test_optimize_zero_generations(tmp_path):
    cfg = opt_cfg(tmp_path, sampler="plain", nsga2={"pop_size": 10, "max_generations": 0})
    assert run("optimize", cfg, tmp_path / "o") == 0
    hist = (tmp_path / "o" / "history_plain.csv").read_text().splitlines()
    assert len(hist) == 2 and hist[1].startswith("0,10,")


def test_optimize_unknown_sampler_or_problem(tmp_path):
    assert run("optimize", opt_cfg(tmp_path, sampler="magic"), tmp_path / "o") == 2
    assert run("optimize", opt_cfg(tmp_path, problem="nope"), tmp_path / "o") == 2


def test_optimize_evaluator_failure_exit_3(tmp_path, monkeypatch):
    calls = {"n": 0}

    def ev(x):
        calls["n"] += 1
        if calls["n"] > 50:
            raise RuntimeError("solver diverged")
        return np.array([x[0], 1 - x[0] + x[1]]), np.zeros(0)

    monkeypatch.setattr(cli, "_problem", lambda sec: Problem("f", np.zeros(2), np.ones(2), 2, 0, ev,
                                                             np.array([2.0, 2.0])))
    assert run("optimize", opt_cfg(tmp_path, sampler="plain"), tmp_path / "o") == 3
    hist = (tmp_path / "o" / "history_plain.csv").read_text().splitlines()
    assert len(hist) == 3  # header plus generations 0 and 1


# ---------------------------------------------------------------- map

def test_map_default_grid(tmp_path):
    cfg = write_cfg(tmp_path, {"map": {"speed_axis": [100.0, 500.0]}})
    assert run("map", cfg, tmp_path / "o") == 0
    rows = (tmp_path / "o" / "map.csv").read_text().splitlines()
    assert rows[0] == "speed_rad_s,torque_Nm,gamma_deg,i_s_A,eta,feasible"
    speeds = [r.split(",")[0] for r in rows[1:]]
    assert speeds.count("100") == 43 and speeds.count("500") == 43
    tp = json.loads((tmp_path / "o" / "tpca.json").read_text())
    assert tp["total"] == pytest.approx(tp["low"] + tp["accelerating"] + tp["high"], rel=1e-8)


def test_map_threshold_monotone(tmp_path):
    fr = {}
    for thr in (0.5, 0.94):
        cfg = write_cfg(tmp_path, {"map": {**SMALL_MAP, "threshold": thr}})
        assert run("map", cfg, tmp_path / str(thr)) == 0
        fr[thr] = json.loads((tmp_path / str(thr) / "premium.json").read_text())["area_fraction"]
    assert fr[0.5] >= fr[0.94]
    assert fr[0.5] > 0


def test_map_empty_feasible_set_exit_4(tmp_path):
    cfg = write_cfg(tmp_path, {"map": {"speed_axis": [100.0], "torque_axis": [500.0, 600.0]}})
    assert run("map", cfg, tmp_path / "o") == 4


def test_map_machine_file_relative_to_config(tmp_path):
    sub = tmp_path / "cfgdir"
    sub.mkdir()
    from mlhr_opt.motor import REFERENCE_MACHINE

    REFERENCE_MACHINE.to_json(sub / "m.json")
    cfg = write_cfg(sub, {"machine": "m.json", "map": SMALL_MAP})
    assert run("map", cfg, tmp_path / "o") == 0
    assert run("map", write_cfg(sub, {"machine": "gone.json", "map": SMALL_MAP}, "c2.json"), tmp_path / "p") == 2


# ---------------------------------------------------------------- drive

def drive_cfg(tmp_path, cycles, name="drive.json"):
    return write_cfg(tmp_path, {"map": SMALL_MAP, "drive": {"cycles": cycles}}, name)


def test_drive_outputs(tmp_path):
    cfg = drive_cfg(tmp_path, ["bundled:triangle.csv"])
    assert run("drive", cfg, tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o" / "drivability.json").read_text())
    tri = summary["cycles"]["triangle"]
    assert tri["points"] == 40 and 0 <= tri["in_premium"] <= tri["points"]
    assert summary["vehicle"]["a_x_max"] == pytest.approx(3.43012524, rel=1e-8)
    assert (tmp_path / "o" / "points_triangle.csv").read_text().startswith("t_s,omega_mech_rad_s,torque_Nm,feasible")


def test_drive_missing_cycle_exit_5(tmp_path):
    assert run("drive", drive_cfg(tmp_path, ["missing.csv"]), tmp_path / "o") == 5


def test_drive_malformed_cycle_exit_5(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("t_s,v_mps\n0,0\n1,oops\n")
    assert run("drive", drive_cfg(tmp_path, ["bad.csv"]), tmp_path / "o") == 5
    assert "line 3" in capsys.readouterr().err


# ---------------------------------------------------------------- determinism and entry point

@pytest.mark.parametrize("cmd", ["sample", "optimize", "map", "drive"])
def test_reruns_are_byte_identical(tmp_path, cmd):
    data = {"seed": 5, "sample": {"n": 30, "dims": 3, "iterations": 100},
            "optimize": {"problem": "zdt1", "n_var": 4, "sampler": "both",
                         "nsga2": {"pop_size": 20, "max_generations": 4, "batch": 5}},
            "map": SMALL_MAP, "drive": {"cycles": ["bundled:trapezoid.csv"]}}
    cfg = write_cfg(tmp_path, data)
    assert run(cmd, cfg, tmp_path / "a", "--workers", "1") == 0
    assert run(cmd, cfg, tmp_path / "b", "--workers", "1") == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_console_script(tmp_path):
    exe = shutil.which("mlhr-opt")
    if exe is None:
        pytest.skip("console script not installed")
    cfg = write_cfg(tmp_path, {"seed": 1, "sample": {"n": 4, "dims": 2, "iterations": 10}})
    res = subprocess.run([exe, "sample", "--config", cfg, "--out", str(tmp_path / "o")],
                         capture_output=True, text=True, env={"MLHR_OPT_LOG": "debug", "PATH": "/usr/bin:/bin"})
    assert res.returncode == 0, res.stderr
    assert "phi_p after" in res.stdout
