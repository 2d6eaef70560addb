"""Compare the numba-compiled kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``XXZDM_DISABLE_JIT``. The timed section excludes the first
(compiling) call.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from xxzdm import _accel
from xxzdm.dynamics import evolve_ode_trajectory
from xxzdm.model import ModelParams

repeat, t_final = int(sys.argv[1]), float(sys.argv[2])
p = ModelParams(2.0, 0.5, 1.0, 0.1, 1.0)
# |10><10| is not stationary under H, so the coherent oscillation sets the step size
rho0 = np.zeros((4, 4), complex)
rho0[1, 1] = 1.0
times = np.linspace(0.0, t_final, 21)
evolve_ode_trajectory(rho0, p, times[:2])  # warm-up / compile
best, steps = float("inf"), 0
for _ in range(repeat):
    start = time.perf_counter()
    _, stats = evolve_ode_trajectory(rho0, p, times)
    best = min(best, time.perf_counter() - start)
    steps = int(stats[0])
print(json.dumps({"backend": _accel.backend(), "seconds": best, "steps": steps}))
"""


def measure(disable: bool, repeat: int, t_final: float) -> dict:
    env = dict(os.environ)
    env.pop("XXZDM_DISABLE_JIT", None)
    if disable:
        env["XXZDM_DISABLE_JIT"] = "1"
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(repeat), str(t_final)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--t-final", type=float, default=20.0)
    args = ap.parse_args()
    fast = measure(False, args.repeat, args.t_final)
    ref = measure(True, args.repeat, args.t_final)
    for r in (fast, ref):
        print(f"{r['backend']:>6}: {r['seconds'] * 1e3:9.2f} ms  ({r['steps']} accepted steps)")
    print(f"speed-up: {ref['seconds'] / fast['seconds']:.1f}x")


if __name__ == "__main__":
    main()
