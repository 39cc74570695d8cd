"""Time the numba kernels against the pure-numpy fallback.

Runs each workload in a child process twice, once with numba and once with
MAVPLAN_DISABLE_NUMBA=1, checks that both produce the same numbers and prints
the speedup. JIT compilation is excluded by a warm-up call.

    python3 benchmarks/bench_numba.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from mavplan import _accel, kernels
from mavplan.dynamics import VehicleParams
from mavplan.planners import PlannerConfig, plan_rrt_star
from mavplan.smoothing import SmootherConfig, ilqr_segment
from mavplan.spatial_map import WorldSpec, build_instance_map, random_world

repeat = int(sys.argv[1])
pv = VehicleParams().as_array()
rng = np.random.default_rng(0)
x0 = np.zeros(12)
us = VehicleParams().hover_thrust / 4 * rng.uniform(0.9, 1.1, (200, 4))
xs = kernels.rollout(x0, us, 0.05, pv)
world = random_world(WorldSpec(seed=1), [(6, 10, 10), (14, 10, 10)], 1.5)
m = build_instance_map(world, np.full(3, 10.0), np.inf)
local = build_instance_map(world, np.array([6.0, 10, 10]), 4.0)

workloads = {
    "rollout_200": lambda: kernels.rollout(x0, us, 0.05, pv),
    "linearize_200": lambda: kernels.linearize_trajectory(xs, us, 0.05, pv, 6e-6),
    "rrt_star": lambda: plan_rrt_star(m, (6, 10, 10), (14, 10, 10), PlannerConfig(seed=3)).waypoints,
    "ilqr_segment": lambda: ilqr_segment(np.concatenate([[6.0, 10, 10], np.zeros(9)]), np.array([9.0, 10, 10]),
                                         local, SmootherConfig(), VehicleParams()).states,
}
out = {"numba": _accel.NUMBA_ENABLED, "results": {}}
for name, fn in workloads.items():
    first = fn()  # warm-up; also the parity reference
    ref = np.asarray(first[0] if isinstance(first, tuple) else first)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    out["results"][name] = {"best_s": min(times), "checksum": float(np.sum(ref)), "shape": list(ref.shape)}
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("MAVPLAN_DISABLE_NUMBA", None)
    if disable:
        env["MAVPLAN_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True,
                          check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    jit = run(False, args.repeat)
    pure = run(True, args.repeat)
    if not jit["numba"]:
        print("numba is not installed; both runs used the numpy path")
    print(f"{'workload':15s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s}  parity")
    ok = True
    for name, a in jit["results"].items():
        b = pure["results"][name]
        same = a["shape"] == b["shape"] and abs(a["checksum"] - b["checksum"]) <= 1e-8 * max(1.0, abs(b["checksum"]))
        ok &= same
        print(f"{name:15s} {a['best_s']:11.5f} {b['best_s']:11.5f} {b['best_s'] / a['best_s']:8.1f}  "
              f"{'ok' if same else 'MISMATCH'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
