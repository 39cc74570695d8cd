"""Planner comparison sweep, map-build timing and pipeline phase breakdown.

Outcome rows (success, cost, length, clearance, iterations) are fully
deterministic under the master seed and go to ``bench.csv``; wall-clock
times go to ``timing.csv`` and ``summary.json`` since they vary per run.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .planners import (AllPlannersFailed, PathNotFound, PlannerConfig, derive_seeds, plan_a_star,
                       plan_and_select, plan_rrt_star)
from .scenario import ScenarioSpec
from .search_space import Bounds, build_search_space, generate_interior_points
from .smoothing import RiccatiFailure, smooth_path, stack_segments
from .spatial_map import build_instance_map, random_world
from .trajectory import fit_bspline

PLANNERS = ("a_star", "rrt_original", "rrt_improved")
CSV_HEADER = ("world", "planner", "success", "cost", "path_length", "min_clearance", "iterations")
TIMING_HEADER = ("world", "planner", "time_s")
PHASES = ("map_build", "search_space", "rrt_star", "ilqr", "bspline")


@dataclass(frozen=True)
class BenchRow:
    world: int
    planner: str
    success: bool
    time_s: float
    cost: float | None = None
    path_length: float | None = None
    min_clearance: float | None = None
    iterations: int = 0

    def __post_init__(self):
        if self.time_s < 0:
            raise ValueError("time_s must be >= 0")
        if (self.cost is not None) != self.success:
            raise ValueError("cost must be present iff success")


@dataclass
class BenchResult:
    rows: list
    map_build_ms: list = field(default_factory=list)
    phase_seconds: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {"planners": {}}
        for name in sorted({r.planner for r in self.rows}):
            rows = [r for r in self.rows if r.planner == name]
            times = [r.time_s for r in rows]
            costs = [r.cost for r in rows if r.success]
            out["planners"][name] = {
                "runs": len(rows),
                "mean_time_s": statistics.fmean(times),
                "median_time_s": statistics.median(times),
                "success_rate": sum(r.success for r in rows) / len(rows),
                "mean_cost": statistics.fmean(costs) if costs else None,
            }
        if self.map_build_ms:
            ms = self.map_build_ms
            out["map_build_ms"] = {"scans": len(ms), "mean": statistics.fmean(ms),
                                   "median": statistics.median(ms), "max": max(ms)}
        if self.phase_seconds:
            out["phase_breakdown_percent"] = phase_percentages(self.phase_seconds)
        return out


def phase_percentages(seconds: dict) -> dict:
    total = sum(seconds.values())
    if total <= 0:
        return {k: 100.0 / len(seconds) for k in seconds}
    return {k: 100.0 * v / total for k, v in seconds.items()}


def _fmt(x) -> str:
    # fixed-point text via format(), independent of the process locale
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9f")


def format_csv(rows) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in sorted(rows, key=lambda r: (r.world, PLANNERS.index(r.planner))):
        lines.append(",".join([str(r.world), r.planner, _fmt(r.success), _fmt(r.cost), _fmt(r.path_length),
                               _fmt(r.min_clearance), _fmt(r.iterations)]))
    return "\n".join(lines) + "\n"


def format_timing_csv(rows) -> str:
    lines = [",".join(TIMING_HEADER)]
    for r in sorted(rows, key=lambda r: (r.world, PLANNERS.index(r.planner))):
        lines.append(f"{r.world},{r.planner},{_fmt(r.time_s)}")
    return "\n".join(lines) + "\n"


def planner_configs(spec: ScenarioSpec, seed: int) -> dict:
    improved = dataclasses.replace(spec.planner, seed=seed)
    original_fields = {f.name: getattr(spec.planner, f.name) for f in dataclasses.fields(PlannerConfig)}
    original_fields.update(seed=seed)
    original = PlannerConfig.original(**{k: v for k, v in original_fields.items()
                                         if k not in ("sampler_mode", "goal_bias")})
    return {"a_star": improved, "rrt_original": original, "rrt_improved": improved}


def _world(spec: ScenarioSpec, world_seed: int) -> np.ndarray:
    if spec.cloud is not None:
        return spec.load_world()
    ws = dataclasses.replace(spec.world, seed=world_seed)
    return random_world(ws, (spec.start, spec.goal), spec.bench.keep_out_radius)


def _bounds(spec: ScenarioSpec) -> Bounds:
    if spec.cloud is not None:
        return None
    return Bounds(np.zeros(3), np.full(3, spec.world.cube_size))


def run_planner(name: str, m, spec: ScenarioSpec, cfg: PlannerConfig, bounds, world: int) -> BenchRow:
    start, goal = np.asarray(spec.start), np.asarray(spec.goal)
    t0 = time.perf_counter()
    try:
        if name == "a_star":
            cand = plan_a_star(m, start, goal, cfg.grid_res, cfg.d_safe, bounds, cfg)
        else:
            cand = plan_rrt_star(m, start, goal, cfg, bounds)
    except PathNotFound:
        return BenchRow(world, name, False, time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    return BenchRow(world, name, True, elapsed, cand.cost, cand.length, cand.min_clearance, cand.iterations)


def time_map_builds(world: np.ndarray, spec: ScenarioSpec, n_scans: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    size = spec.world.cube_size
    out = []
    for _ in range(n_scans):
        center = rng.uniform(0.0, size, 3)
        t0 = time.perf_counter()
        build_instance_map(world, center, spec.mission.map_radius, spec.mission.inflation)
        out.append(1e3 * (time.perf_counter() - t0))
    return out


def time_pipeline(world: np.ndarray, spec: ScenarioSpec, seed: int, bounds) -> dict:
    """Seconds spent per phase of one planning episode from the start pose."""
    start, goal = np.asarray(spec.start), np.asarray(spec.goal)
    cfg = dataclasses.replace(spec.planner, seed=seed)
    out = dict.fromkeys(PHASES, 0.0)
    t = time.perf_counter()
    m = build_instance_map(world, start, spec.mission.map_radius, spec.mission.inflation)
    out["map_build"] = time.perf_counter() - t
    if bounds is None:
        bounds = Bounds.around(start, goal, margin=cfg.bounds_margin)
    t = time.perf_counter()
    sample_set = generate_interior_points(build_search_space(start, goal), cfg.lattice_n, bounds)
    out["search_space"] = time.perf_counter() - t
    t = time.perf_counter()
    try:
        selected, _ = plan_and_select(m, start, goal, cfg, bounds, sample_set=sample_set)
    except (PathNotFound, AllPlannersFailed):
        out["rrt_star"] = time.perf_counter() - t
        return out
    out["rrt_star"] = time.perf_counter() - t
    t = time.perf_counter()
    try:
        segments = smooth_path(selected, np.concatenate([start, np.zeros(9)]), m, spec.smoother, spec.vehicle)
    except RiccatiFailure:
        out["ilqr"] = time.perf_counter() - t
        return out
    out["ilqr"] = time.perf_counter() - t
    t = time.perf_counter()
    _, xs = stack_segments(segments)
    fit_bspline(xs[:, 0:3], spec.mission.speed)
    out["bspline"] = time.perf_counter() - t
    return out


def warm_up(spec: ScenarioSpec) -> None:
    """Run each planner once on a tiny empty problem so JIT compilation is not timed."""
    m = build_instance_map(np.zeros((0, 3)), np.zeros(3), math.inf, spec.mission.inflation)
    start, goal = np.zeros(3), np.array([2.0, 0.0, 0.0])
    cfgs = planner_configs(spec, 0)
    plan_a_star(m, start, goal, cfgs["a_star"].grid_res, cfgs["a_star"].d_safe, None, cfgs["a_star"])
    for name in ("rrt_original", "rrt_improved"):
        try:
            plan_rrt_star(m, start, goal, dataclasses.replace(cfgs[name], max_iterations=50))
        except PathNotFound:
            pass


def run_benchmark(spec: ScenarioSpec, n_worlds: int | None = None, planners=PLANNERS,
                  progress=None) -> BenchResult:
    """Run every selected planner on ``n_worlds`` seeded worlds; never aborts on a failed row."""
    n_worlds = spec.bench.worlds if n_worlds is None else n_worlds
    if n_worlds < 1:
        raise ValueError("n_worlds must be >= 1")
    unknown = set(planners) - set(PLANNERS)
    if unknown:
        raise ValueError(f"unknown planner(s): {sorted(unknown)}")
    world_seeds = derive_seeds(spec.seed, n_worlds)
    warm_up(spec)
    bounds = _bounds(spec)
    rows, map_ms = [], []
    phases = dict.fromkeys(PHASES, 0.0)
    for w, ws in enumerate(world_seeds):
        world = _world(spec, ws)
        # full-world index centered on the cube so every planner sees all obstacles
        center = bounds.center if bounds is not None else np.mean([spec.start, spec.goal], axis=0)
        m = build_instance_map(world, center, math.inf, spec.mission.inflation)
        cfgs = planner_configs(spec, ws)
        for name in PLANNERS:
            if name in planners:
                rows.append(run_planner(name, m, spec, cfgs[name], bounds, w))
        if w < spec.bench.map_scans:
            map_ms.extend(time_map_builds(world, spec, 1, ws))
        if w < spec.bench.breakdown_worlds:
            for k, v in time_pipeline(world, spec, ws, bounds).items():
                phases[k] += v
        if progress is not None:
            progress(w + 1, n_worlds)
    rows.sort(key=lambda r: (r.world, PLANNERS.index(r.planner)))
    return BenchResult(rows, map_ms, phases if spec.bench.breakdown_worlds > 0 else {})


def write_outputs(result: BenchResult, out_dir) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, "bench.csv"),
        "timing": os.path.join(out_dir, "timing.csv"),
        "summary": os.path.join(out_dir, "summary.json"),
    }
    with open(paths["csv"], "w", newline="") as fh:
        fh.write(format_csv(result.rows))
    with open(paths["timing"], "w", newline="") as fh:
        fh.write(format_timing_csv(result.rows))
    with open(paths["summary"], "w") as fh:
        json.dump(result.summary(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return paths
