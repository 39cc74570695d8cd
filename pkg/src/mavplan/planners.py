"""RRT* (ellipsoid-lattice and uniform-box samplers), grid A*, and multi-instance selection."""

from __future__ import annotations

import heapq
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .search_space import (
    DEFAULT_LATTICE_N,
    Bounds,
    SampleSet,
    build_search_space,
    generate_interior_points,
)
from .spatial_map import InstanceMap, segment_samples

SAMPLER_MODES = ("ellipsoid_set", "uniform_box")


class PathNotFound(RuntimeError):
    pass


class NoFreeIntermediateGoal(PathNotFound):
    pass


class AllPlannersFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    step: float = 1.0
    rewire_radius: float | None = None
    max_iterations: int = 3000
    # stop this many iterations after the first solution; None runs to max_iterations
    refine_iterations: int | None = 200
    goal_tolerance: float = 0.5
    horizon: float = 10.0
    d_safe: float = 0.2
    num_parallel: int = 4
    sampler_mode: str = "ellipsoid_set"
    seed: int = 0
    goal_bias: float = 0.1
    lattice_n: int = DEFAULT_LATTICE_N
    collision_step: float = 0.1
    bounds_margin: float = 4.0
    grid_res: float = 0.5

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be > 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if self.num_parallel < 1:
            raise ValueError("num_parallel must be >= 1")
        if self.d_safe < 0:
            raise ValueError("d_safe must be >= 0")
        if self.sampler_mode not in SAMPLER_MODES:
            raise ValueError(f"sampler_mode must be one of {SAMPLER_MODES}")
        if self.rewire_radius is not None and self.rewire_radius < self.step:
            raise ValueError("rewire_radius must be >= step")

    @classmethod
    def original(cls, **overrides) -> PlannerConfig:
        """Plain RRT*: uniform samples over the bounds, no goal bias."""
        return cls(**{"sampler_mode": "uniform_box", "goal_bias": 0.0, **overrides})

    @property
    def radius(self) -> float:
        return 2.5 * self.step if self.rewire_radius is None else self.rewire_radius


@dataclass(frozen=True)
class PathCandidate:
    waypoints: np.ndarray
    goal: np.ndarray
    cost: float
    min_clearance: float
    planner: str = "rrt_improved"
    iterations: int = 0
    seed: int = 0

    @property
    def length(self) -> float:
        return path_length(self.waypoints)

    def __len__(self) -> int:
        return len(self.waypoints)


def steer(a, b, step: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    n = np.linalg.norm(d)
    if n <= step:
        return b.copy()
    return a + d * (step / n)


def path_length(waypoints) -> float:
    w = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    return float(np.sum(np.linalg.norm(np.diff(w, axis=0), axis=1)))


def path_cost(waypoints, goal) -> float:
    """Segment lengths plus the terminal gap from the last waypoint to ``goal``."""
    w = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(w) == 0:
        raise ValueError("path needs at least one waypoint")
    return float(np.linalg.norm(w[-1] - np.asarray(goal, dtype=float)) + path_length(w))


def truncate_path(waypoints, horizon: float) -> np.ndarray:
    """Cut a polyline at cumulative length ``horizon`` (interpolating the last point)."""
    w = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    out = [w[0]]
    travelled = 0.0
    for a, b in zip(w[:-1], w[1:]):
        seg = float(np.linalg.norm(b - a))
        if travelled + seg <= horizon:
            out.append(b)
            travelled += seg
            continue
        remaining = horizon - travelled
        if remaining > 1e-9:
            out.append(a + (b - a) * (remaining / seg))
        break
    return np.array(out)


def path_clearance(m: InstanceMap, waypoints, step: float) -> float:
    w = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if m.empty:
        return math.inf
    if len(w) == 1:
        return m.signed_distance(w[0])
    pts = np.vstack([segment_samples(a, b, step) for a, b in zip(w[:-1], w[1:])])
    return m.min_clearance(pts)


def make_candidate(m: InstanceMap, waypoints, goal, cfg: PlannerConfig, planner: str, iterations=0, seed=0):
    w = np.ascontiguousarray(waypoints, dtype=float).reshape(-1, 3)
    goal = np.asarray(goal, dtype=float)
    return PathCandidate(
        w, goal, path_cost(w, goal), path_clearance(m, w, cfg.collision_step), planner, iterations, seed
    )


def intermediate_goal(start, goal, horizon: float, m: InstanceMap, d_safe: float = 0.2,
                      lattice_n: int = DEFAULT_LATTICE_N, bounds: Bounds | None = None) -> np.ndarray:
    """Goal clipped to the planning horizon.

    Beyond the horizon, the point at distance ``horizon`` along start->goal is
    used; if it is occupied the closest free lattice point of the search space
    between start and that point replaces it.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    d = goal - start
    dist = float(np.linalg.norm(d))
    if dist <= horizon:
        return goal.copy()
    p = start + d * (horizon / dist)
    if m.signed_distance(p) >= d_safe:
        return p
    samples = generate_interior_points(build_search_space(start, p), lattice_n, bounds).points
    if len(samples):
        order = np.argsort(np.linalg.norm(samples - p, axis=1), kind="stable")
        sd = m.signed_distances(samples[order])
        free = np.flatnonzero(sd >= d_safe)
        if len(free):
            return samples[order[free[0]]].copy()
    raise NoFreeIntermediateGoal(f"no free sample near horizon point {p.tolist()}")


class Tree:
    """RRT* tree with parent links and cost-to-come."""

    def __init__(self, root, capacity: int):
        self.nodes = np.zeros((capacity + 1, 3))
        self.parent = np.full(capacity + 1, -1, dtype=np.int64)
        self.cost = np.zeros(capacity + 1)
        self.children: list[list[int]] = [[]]
        self.nodes[0] = root
        self.count = 1

    def add(self, p, parent: int, cost: float) -> int:
        i = self.count
        self.nodes[i] = p
        self.parent[i] = parent
        self.cost[i] = cost
        self.children.append([])
        self.children[parent].append(i)
        self.count += 1
        return i

    def reparent(self, i: int, new_parent: int, new_cost: float) -> None:
        self.children[self.parent[i]].remove(i)
        self.children[new_parent].append(i)
        self.parent[i] = new_parent
        delta = new_cost - self.cost[i]
        stack = [i]
        while stack:
            j = stack.pop()
            self.cost[j] += delta
            stack.extend(self.children[j])

    def path_to(self, i: int) -> np.ndarray:
        idx = []
        while i >= 0:
            idx.append(i)
            i = self.parent[i]
        return self.nodes[idx[::-1]].copy()

    def audit(self, tol: float = 1e-9) -> float:
        """Largest |cost - (parent cost + edge)| over non-root nodes."""
        if self.count == 1:
            return 0.0
        idx = np.arange(1, self.count)
        par = self.parent[idx]
        edge = np.linalg.norm(self.nodes[idx] - self.nodes[par], axis=1)
        return float(np.max(np.abs(self.cost[idx] - self.cost[par] - edge)))


class _LatticeSampler:
    """Uniform draws without replacement from a fixed point set, reshuffled when exhausted."""

    def __init__(self, points: np.ndarray, rng: np.random.Generator):
        self.points = points
        self.rng = rng
        self._order = rng.permutation(len(points))
        self._pos = 0

    def __call__(self) -> np.ndarray:
        if self._pos >= len(self._order):
            self._order = self.rng.permutation(len(self.points))
            self._pos = 0
        p = self.points[self._order[self._pos]]
        self._pos += 1
        return p


def _sampler(cfg: PlannerConfig, rng, bounds: Bounds, sample_set: SampleSet | None):
    if cfg.sampler_mode == "ellipsoid_set" and sample_set is not None and len(sample_set):
        return _LatticeSampler(sample_set.points, rng)
    return lambda: rng.uniform(bounds.lo, bounds.hi)


def default_bounds(start, goal, cfg: PlannerConfig) -> Bounds:
    return Bounds.around(start, goal, margin=cfg.bounds_margin)


def plan_rrt_star(m: InstanceMap, start, goal, cfg: PlannerConfig, bounds: Bounds | None = None,
                  sample_set: SampleSet | None = None, effective_goal=None, tree_out: list | None = None) -> PathCandidate:
    """Single RRT* instance toward the horizon-clipped goal.

    ``sample_set`` and ``effective_goal`` let several instances share one
    precomputed search space; they are derived here when omitted.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if bounds is None:
        bounds = default_bounds(start, goal, cfg)
    if effective_goal is None:
        effective_goal = intermediate_goal(start, goal, cfg.horizon, m, cfg.d_safe, cfg.lattice_n, bounds)
    target = np.asarray(effective_goal, dtype=float)
    if cfg.sampler_mode == "ellipsoid_set" and sample_set is None:
        sample_set = generate_interior_points(build_search_space(start, target), cfg.lattice_n, bounds)

    rng = np.random.default_rng(cfg.seed)
    draw = _sampler(cfg, rng, bounds, sample_set)
    tree = Tree(start, cfg.max_iterations)
    radius = cfg.radius
    goal_links: list[int] = []
    first_hit = None

    def clear(a, b):
        return m.segment_clear(a, b, cfg.collision_step, cfg.d_safe)

    if np.linalg.norm(target - start) <= cfg.step and clear(start, target):
        goal_links.append(0)
        first_hit = 0

    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if first_hit is not None and cfg.refine_iterations is not None and it - first_hit > cfg.refine_iterations:
            break
        q = target if rng.random() < cfg.goal_bias else draw()
        i_near = kernels.nearest_index(tree.nodes, tree.count, q)
        x_near = tree.nodes[i_near]
        x_new = steer(x_near, q, cfg.step)
        if np.linalg.norm(x_new - x_near) < 1e-9 or not clear(x_near, x_new):
            continue

        near = kernels.near_indices(tree.nodes, tree.count, x_new, radius)
        d_near = np.linalg.norm(tree.nodes[near] - x_new, axis=1)
        via = tree.cost[near] + d_near
        parent, best = i_near, tree.cost[i_near] + float(np.linalg.norm(x_new - x_near))
        for k in np.argsort(via, kind="stable"):
            if via[k] >= best:
                break
            if clear(tree.nodes[near[k]], x_new):
                parent, best = int(near[k]), float(via[k])
                break
        i_new = tree.add(x_new, parent, best)

        for k in range(len(near)):
            j = int(near[k])
            if j == parent:
                continue
            c = best + d_near[k]
            if c < tree.cost[j] - 1e-12 and clear(x_new, tree.nodes[j]):
                tree.reparent(j, i_new, c)

        if np.linalg.norm(target - x_new) <= max(cfg.step, cfg.goal_tolerance) and clear(x_new, target):
            goal_links.append(i_new)
            if first_hit is None:
                first_hit = it

    if tree_out is not None:
        tree_out.append(tree)
    if not goal_links:
        raise PathNotFound(f"no path after {it} iterations")
    links = np.asarray(goal_links)
    totals = tree.cost[links] + np.linalg.norm(tree.nodes[links] - target, axis=1)
    best_link = int(links[np.argmin(totals)])
    path = tree.path_to(best_link)
    if np.linalg.norm(path[-1] - target) > 1e-12:
        path = np.vstack([path, target])
    path = truncate_path(path, cfg.horizon)
    name = "rrt_improved" if cfg.sampler_mode == "ellipsoid_set" else "rrt_original"
    return make_candidate(m, path, target, cfg, name, it, cfg.seed)


_MOVES = np.array([d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)], dtype=np.int64)
_MOVE_LEN = np.linalg.norm(_MOVES, axis=1)


def plan_a_star(m: InstanceMap, start, goal, grid_res: float = 0.5, d_safe: float = 0.2,
                bounds: Bounds | None = None, cfg: PlannerConfig | None = None) -> PathCandidate:
    """26-connected grid A* with a Euclidean heuristic.

    The lattice is anchored at ``start`` (so start is a cell center) and spans
    ``bounds``; a cell is traversable when its center has clearance >= d_safe.
    """
    if grid_res <= 0:
        raise ValueError("grid_res must be > 0")
    cfg = cfg or PlannerConfig(d_safe=d_safe, grid_res=grid_res)
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if bounds is None:
        bounds = default_bounds(start, goal, cfg)
    lo_idx = np.ceil((bounds.lo - start) / grid_res - 1e-9).astype(np.int64)
    hi_idx = np.floor((bounds.hi - start) / grid_res + 1e-9).astype(np.int64)
    lo_idx = np.minimum(lo_idx, 0)
    hi_idx = np.maximum(hi_idx, 0)
    shape = hi_idx - lo_idx + 1

    def centers(cells):
        return start + (cells + lo_idx) * grid_res

    goal_cell = np.clip(np.rint((goal - start) / grid_res).astype(np.int64), lo_idx, hi_idx) - lo_idx
    start_cell = -lo_idx

    strides = np.array([shape[1] * shape[2], shape[2], 1], dtype=np.int64)
    axes = [np.arange(n) for n in shape]
    all_cells = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    free_mask = m.signed_distances(centers(all_cells)) >= d_safe

    s_flat = int(start_cell @ strides)
    g_flat = int(goal_cell @ strides)
    if not free_mask[g_flat]:
        raise PathNotFound("goal cell is occupied")

    g_score = {s_flat: 0.0}
    parent = {s_flat: -1}
    goal_c = centers(goal_cell)
    h0 = float(np.linalg.norm(centers(start_cell) - goal_c))
    heap = [(h0, 0, s_flat)]
    tie = itertools.count(1)
    closed = set()
    found = s_flat == g_flat
    while heap and not found:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        closed.add(cur)
        if cur == g_flat:
            found = True
            break
        cell = np.array([cur // strides[0], (cur // strides[1]) % shape[1], cur % shape[2]])
        nb = cell + _MOVES
        inside = np.all((nb >= 0) & (nb < shape), axis=1)
        nb = nb[inside]
        step_len = _MOVE_LEN[inside] * grid_res
        flat = nb @ strides
        free = free_mask[flat]
        nb_centers = centers(nb)
        h = np.linalg.norm(nb_centers - goal_c, axis=1)
        g_cur = g_score[cur]
        for k in np.flatnonzero(free):
            f_k = int(flat[k])
            if f_k in closed:
                continue
            g_new = g_cur + float(step_len[k])
            if g_new < g_score.get(f_k, math.inf) - 1e-12:
                g_score[f_k] = g_new
                parent[f_k] = cur
                heapq.heappush(heap, (g_new + float(h[k]), next(tie), f_k))
    if not found:
        raise PathNotFound("goal cell unreachable")
    chain = []
    cur = g_flat
    while cur >= 0:
        chain.append(cur)
        cur = parent[cur]
    cells = np.array([[c // strides[0], (c // strides[1]) % shape[1], c % shape[2]] for c in chain[::-1]])
    path = centers(cells)
    path[0] = start
    return make_candidate(m, path, goal, cfg, "a_star", len(closed), 0)


def derive_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def select_candidate(candidates, d_safe: float) -> PathCandidate:
    """Cheapest candidate with clearance >= d_safe, else the one with most clearance."""
    ranked = sorted(candidates, key=lambda c: c.cost)
    for c in ranked:
        if c.min_clearance >= d_safe:
            return c
    return max(ranked, key=lambda c: c.min_clearance)


def plan_and_select(m: InstanceMap, start, goal, cfg: PlannerConfig, bounds: Bounds | None = None,
                    max_workers: int | None = None, sample_set: SampleSet | None = None):
    """Run ``cfg.num_parallel`` RRT* instances on one map snapshot and pick the safest cheapest path.

    Returns ``(selected, candidates)`` with candidates sorted by cost.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if bounds is None:
        bounds = default_bounds(start, goal, cfg)
    target = intermediate_goal(start, goal, cfg.horizon, m, cfg.d_safe, cfg.lattice_n, bounds)
    if cfg.sampler_mode == "ellipsoid_set" and sample_set is None:
        sample_set = generate_interior_points(build_search_space(start, target), cfg.lattice_n, bounds)
    seeds = derive_seeds(cfg.seed, cfg.num_parallel)

    def run(seed):
        try:
            return plan_rrt_star(m, start, goal, replace(cfg, seed=seed), bounds, sample_set, target)
        except PathNotFound:
            return None

    workers = max_workers or min(cfg.num_parallel, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    candidates = sorted((r for r in results if r is not None), key=lambda c: c.cost)
    if not candidates:
        raise AllPlannersFailed(f"all {cfg.num_parallel} planner instances failed")
    return select_candidate(candidates, cfg.d_safe), candidates
