"""Time the hot kernels with numba on and off.

Each path runs in its own interpreter because MLHR_OPT_NUMBA is read at
import time. Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from mlhr_opt import _jit
from mlhr_opt.motor import REFERENCE_MACHINE
from mlhr_opt.trajectory import build_map, default_torque_axis
from mlhr_opt.sampling.lhs import lhs_init, lhs_optimize
from mlhr_opt.sampling.cluster import dbscan
from mlhr_opt.sampling.svr import svr_fit
from mlhr_opt.optimizer.pareto import ranks

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
X_lhs = lhs_init(100, 8, 0)
P = rng.random((400, 2))
F = rng.random((500, 2))
Xs = rng.random((60, 3))
ys = np.sin(3 * Xs[:, 0]) + Xs[:, 1]

jobs = {
    "map 20x43": lambda: build_map(REFERENCE_MACHINE, np.linspace(10, 1000, 20), default_torque_axis()),
    "lhs_optimize 100x8 x500": lambda: lhs_optimize(X_lhs, 500, 1),
    "dbscan 400 pts": lambda: dbscan(P, 0.05, 3),
    "nds 500 pts": lambda: ranks(F),
    "svr_fit m=60": lambda: svr_fit(Xs, ys, 2.0, 0.01, 1.5),
}
out = {"numba": _jit.ENABLED}
for name, job in jobs.items():
    job()  # warm-up, includes compilation
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        job()
        best = min(best, time.perf_counter() - t)
    out[name] = best
print(json.dumps(out))
"""


def run(flag, repeat):
    env = dict(os.environ, MLHR_OPT_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast, slow = run("1", args.repeat), run("0", args.repeat)
    if not fast.pop("numba"):
        print("numba not available; both columns use the fallback")
    slow.pop("numba")
    print(f"{'kernel':<26}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    for name in fast:
        print(f"{name:<26}{fast[name]:>12.4g}{slow[name]:>12.4g}{slow[name] / fast[name]:>10.1f}")


if __name__ == "__main__":
    main()
