"""``mavplan`` command line: bench, mission, smooth, sample-space.

Exit codes: 0 success, 1 usage error, 2 scenario parse/validation error,
3 goal occupied, 4 no path, 5 mission timeout.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import io
from .scenario import ParseError, ScenarioSpec, ValidationError, parse_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_GOAL_OCCUPIED = 3
EXIT_NO_PATH = 4
EXIT_TIMEOUT = 5

_OUTCOME_EXIT = {"reached": EXIT_OK, "goal_occupied": EXIT_GOAL_OCCUPIED, "no_path": EXIT_NO_PATH}


def _load(args) -> ScenarioSpec:
    spec = parse_scenario(args.scenario) if args.scenario else ScenarioSpec()
    if getattr(args, "seed", None) is not None:
        spec = spec.with_seed(args.seed)
    return spec


def _cmd_bench(args) -> int:
    from .bench import PLANNERS, run_benchmark, write_outputs

    spec = _load(args)
    planners = PLANNERS
    if args.planner:
        planners = tuple(p for name in args.planner for p in name.split(","))
        bad = sorted(set(planners) - set(PLANNERS))
        if bad:
            print(f"error: unknown planner(s) {bad}; choose from {list(PLANNERS)}", file=sys.stderr)
            return EXIT_USAGE

    def progress(done, total):
        if not args.quiet:
            print(f"\rworld {done}/{total}", end="" if done < total else "\n", file=sys.stderr)

    result = run_benchmark(spec, args.worlds, planners, progress)
    paths = write_outputs(result, args.out)
    summary = result.summary()
    for name, s in summary["planners"].items():
        print(f"{name:13s} mean {s['mean_time_s']:.4f} s  median {s['median_time_s']:.4f} s  "
              f"success {100 * s['success_rate']:.0f}%")
    print(f"wrote {paths['csv']}, {paths['timing']}, {paths['summary']}")
    return EXIT_OK


def _cmd_mission(args) -> int:
    from .mission import MissionTimeout, run_mission

    spec = _load(args)
    world = spec.load_world()
    os.makedirs(args.out, exist_ok=True)
    try:
        log = run_mission(world, spec.start, spec.goal, spec.planner_config(), spec.smoother,
                          spec.vehicle, spec.mission)
        code = _OUTCOME_EXIT[log.outcome]
    except MissionTimeout as exc:
        log = exc.log
        log.outcome, log.reason = "timeout", str(exc)
        code = EXIT_TIMEOUT
    with open(os.path.join(args.out, "mission_log.json"), "w") as fh:
        fh.write(log.to_json() + "\n")
    io.write_points(os.path.join(args.out, "executed.txt"), np.array(log.executed).reshape(-1, 3))
    planned = [e for e in log.episodes if e.get("success")]
    for i, ep in enumerate(planned):
        io.write_points(os.path.join(args.out, f"planned_{i:02d}.txt"), ep["waypoints"])
    if code == EXIT_OK:
        print(f"goal reached in {log.ticks} ticks, {log.gen_episodes} plan episode(s), {log.replans} replan(s)")
    else:
        print(f"mission failed: {log.reason}", file=sys.stderr)
    return code


def _cmd_smooth(args) -> int:
    from .smoothing import RiccatiFailure, smooth_path, stack_segments
    from .spatial_map import build_instance_map
    from .trajectory import fit_bspline, sample_many

    spec = _load(args)
    waypoints = io.read_points(args.path)
    if len(waypoints) < 2:
        print("error: path file needs at least two waypoints", file=sys.stderr)
        return EXIT_USAGE
    world = spec.load_world() if (args.scenario or args.with_world) else np.zeros((0, 3))
    m = build_instance_map(world, waypoints[0], math.inf, spec.mission.inflation)
    x0 = np.concatenate([waypoints[0], np.zeros(9)])
    try:
        segments = smooth_path(waypoints, x0, m, spec.smoother, spec.vehicle)
    except RiccatiFailure as exc:
        print(f"smoothing failed: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    times, xs = stack_segments(segments)
    os.makedirs(args.out, exist_ok=True)
    io.write_trajectory(os.path.join(args.out, "ilqr_trajectory.txt"), times, xs)
    spline = fit_bspline(xs[:, 0:3], spec.mission.speed)
    ts = np.linspace(0.0, spline.duration, max(2, int(math.ceil(spline.duration / spec.smoother.dt)) + 1))
    pos, vel, _ = sample_many(spline, ts)
    io.write_trajectory(os.path.join(args.out, "spline_trajectory.txt"), ts, np.hstack([pos, vel]))
    print(f"{len(segments)} segment(s), {len(xs)} states, spline duration {spline.duration:.3f} s")
    return EXIT_OK


def _cmd_sample_space(args) -> int:
    from .search_space import build_search_space, generate_interior_points

    spec = _load(args)
    e = build_search_space(spec.start, spec.goal)
    n = args.n if args.n is not None else spec.planner.lattice_n
    samples = generate_interior_points(e, n)
    os.makedirs(args.out, exist_ok=True)
    io.write_points(os.path.join(args.out, "sample_space.txt"), samples.points)
    meta = {"center": e.c.tolist(), "semi_axes": e.r.tolist(), "rotation": e.R.tolist(), "n": n,
            "count": len(samples)}
    with open(os.path.join(args.out, "sample_space.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    print(f"{len(samples)} points written")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mavplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--scenario", help="YAML scenario file (defaults used when omitted)")
        p.add_argument("--seed", type=int, help="master seed, overrides the scenario")
        p.add_argument("--out", default=out_default, help="output directory")

    p = sub.add_parser("bench", help="planner comparison sweep")
    common(p, "bench_out")
    p.add_argument("--worlds", type=int, help="number of seeded worlds")
    p.add_argument("--planner", action="append", help="restrict to planner(s): a_star, rrt_original, rrt_improved")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("mission", help="closed-loop mission simulation")
    common(p, "mission_out")
    p.set_defaults(func=_cmd_mission)

    p = sub.add_parser("smooth", help="smooth a waypoint file into a trajectory")
    common(p, "smooth_out")
    p.add_argument("path", help="waypoint file, one 'x y z' per line")
    p.add_argument("--with-world", action="store_true", help="include the default generated world as obstacles")
    p.set_defaults(func=_cmd_smooth)

    p = sub.add_parser("sample-space", help="dump the ellipsoid lattice for the scenario start/goal")
    common(p, "sample_out")
    p.add_argument("--n", type=int, help="lattice density")
    p.set_defaults(func=_cmd_sample_space)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "worlds", None) is not None and args.worlds < 1:
        print("error: --worlds must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"ParseError: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"ValidationError: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
