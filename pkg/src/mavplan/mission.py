"""Wait/Gen/Exec replanning loop with a PD velocity regulator.

The simulated plant is a first-order velocity-command model (an autopilot
velocity loop is assumed); the full rotor dynamics are only used inside the
iLQR smoother. The instance map is rebuilt around the vehicle every tick
through a ``MapBuffer`` and each planning episode reads one snapshot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .dynamics import VehicleParams
from .planners import AllPlannersFailed, PathNotFound, PlannerConfig, plan_and_select
from .search_space import Bounds
from .smoothing import RiccatiFailure, SmootherConfig, smooth_path, stack_segments
from .spatial_map import DEFAULT_INFLATION, DEFAULT_RADIUS, MapBuffer, build_instance_map
from .trajectory import BSpline, fit_bspline, length as spline_length, sample


class MissionState(str, Enum):
    WAIT = "Wait"
    GEN = "Gen"
    EXEC = "Exec"


class MissionEvent(str, Enum):
    HAVE_GOAL = "HaveGoal"
    NO_GOAL = "NoGoal"
    PLAN_SUCCESS = "PlanSuccess"
    PLAN_NOT_SUCCESS = "PlanNotSuccess"
    PLAN_CANNOT_BE_FOUND = "PlanCannotBeFound"
    IN_PROGRESS = "InProgress"
    COLLISION_DETECTED = "CollisionDetected"
    SUDDEN_CHANGE = "SuddenChange"
    GOAL_REACHED = "GoalReached"


S, E = MissionState, MissionEvent

TRANSITIONS = {
    (S.WAIT, E.HAVE_GOAL): S.GEN,
    (S.WAIT, E.NO_GOAL): S.WAIT,
    (S.GEN, E.PLAN_SUCCESS): S.EXEC,
    (S.GEN, E.PLAN_NOT_SUCCESS): S.GEN,
    (S.GEN, E.PLAN_CANNOT_BE_FOUND): S.WAIT,
    (S.EXEC, E.IN_PROGRESS): S.EXEC,
    (S.EXEC, E.COLLISION_DETECTED): S.GEN,
    (S.EXEC, E.SUDDEN_CHANGE): S.WAIT,
    (S.EXEC, E.GOAL_REACHED): S.WAIT,
}


def transition(state: MissionState, event: MissionEvent) -> MissionState:
    """Total transition function; undefined pairs leave the state unchanged."""
    return TRANSITIONS.get((MissionState(state), MissionEvent(event)), MissionState(state))


@dataclass(frozen=True)
class Odometry:
    position: np.ndarray
    velocity: np.ndarray
    yaw: float = 0.0
    timestamp: float = 0.0


@dataclass(frozen=True)
class PdGains:
    kp: tuple = (1.2, 1.2, 1.2)
    kd: tuple = (0.3, 0.3, 0.3)
    kp_yaw: float = 0.8

    def __post_init__(self):
        if min(self.kp) < 0 or min(self.kd) < 0 or self.kp_yaw < 0:
            raise ValueError("PD gains must be non-negative")


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def pd_command(actual: Odometry, desired: Odometry, gains: PdGains):
    """Velocity command (feed-forward + PD on position/velocity error) and yaw command."""
    dp = np.asarray(desired.position, dtype=float) - np.asarray(actual.position, dtype=float)
    dv = np.asarray(desired.velocity, dtype=float) - np.asarray(actual.velocity, dtype=float)
    v_cmd = np.asarray(desired.velocity, dtype=float) + np.asarray(gains.kp) * dp + np.asarray(gains.kd) * dv
    yaw_cmd = desired.yaw + gains.kp_yaw * wrap_angle(desired.yaw - actual.yaw)
    return v_cmd, yaw_cmd


@dataclass(frozen=True)
class MissionConfig:
    dt: float = 0.05
    map_radius: float = DEFAULT_RADIUS
    inflation: float = DEFAULT_INFLATION
    goal_tolerance: float = 0.3
    max_ticks: int = 6000
    lookahead: float = 2.0
    lookahead_step: float = 0.1
    tau: float = 0.2
    speed: float = 1.5
    tracking_slack: float = 0.2
    plan_margin: float = 0.2
    max_plan_attempts: int = 3
    bounds_margin: float = 4.0
    gains: PdGains = field(default_factory=PdGains)
    sudden_change_ticks: tuple = ()

    def __post_init__(self):
        if self.dt <= 0 or self.tau <= 0 or self.speed <= 0:
            raise ValueError("dt, tau and speed must be > 0")
        if self.max_ticks < 1 or self.max_plan_attempts < 1:
            raise ValueError("max_ticks and max_plan_attempts must be >= 1")


@dataclass
class MissionLog:
    states: list = field(default_factory=list)
    events: list = field(default_factory=list)
    episodes: list = field(default_factory=list)
    executed: list = field(default_factory=list)
    outcome: str = "running"
    reason: str = ""
    min_clearance: float = math.inf

    @property
    def replans(self) -> int:
        return sum(e in (E.COLLISION_DETECTED.value, E.SUDDEN_CHANGE.value) for _, e in self.events)

    @property
    def gen_episodes(self) -> int:
        return len(self.episodes)

    @property
    def ticks(self) -> int:
        return len(self.events)

    def trace(self) -> list[str]:
        """State trace with consecutive repeats collapsed."""
        out = []
        for s in self.states:
            if not out or out[-1] != s:
                out.append(s)
        return out

    def audit(self) -> bool:
        """Every logged state change is reproduced by ``transition`` on the logged event."""
        return all(
            transition(self.states[i], ev).value == self.states[i + 1] for i, (_, ev) in enumerate(self.events)
        )

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "reason": self.reason,
            "metrics": {
                "ticks": self.ticks,
                "replans": self.replans,
                "gen_episodes": self.gen_episodes,
                # strict JSON has no infinity; null means no obstacle was ever indexed
                "min_clearance": self.min_clearance if math.isfinite(self.min_clearance) else None,
            },
            "trace": self.trace(),
            "states": self.states,
            "events": [{"tick": t, "event": e} for t, e in self.events],
            "episodes": self.episodes,
            "executed": self.executed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)


class MissionTimeout(RuntimeError):
    def __init__(self, log: MissionLog):
        super().__init__(f"tick limit reached after {log.ticks} ticks")
        self.log = log


@dataclass
class _Plan:
    spline: BSpline
    end: np.ndarray
    t: float = 0.0


def _episode_seed(seed: int, episode: int, attempt: int) -> int:
    return int(np.random.SeedSequence([seed, episode, attempt]).generate_state(1)[0])


def _window(plan: _Plan, horizon: float, step: float) -> np.ndarray:
    t0 = min(plan.t, plan.spline.duration)
    t1 = min(plan.t + horizon, plan.spline.duration)
    ts = np.append(np.arange(t0, t1, step), t1)
    return np.array([sample(plan.spline, float(t))[0] for t in ts])


def _unsafe(local_map, pts, d_safe: float) -> bool:
    """Any sample below d_safe, tolerating a start that is already closer (no worsening)."""
    sd = local_map.signed_distances(pts)
    limit = min(d_safe, float(sd[0]) - 1e-9) if len(sd) else d_safe
    return bool(np.any(sd < limit))


def run_mission(world, start, goal, planner_cfg: PlannerConfig | None = None,
                smoother_cfg: SmootherConfig | None = None, params: VehicleParams | None = None,
                cfg: MissionConfig | None = None) -> MissionLog:
    """Closed-loop simulation from ``start`` (position or 12-state) to ``goal``.

    Returns the log on arrival or when the goal is rejected / no plan exists
    (see ``MissionLog.outcome``); raises ``MissionTimeout`` at the tick limit.
    """
    planner_cfg = planner_cfg or PlannerConfig()
    smoother_cfg = smoother_cfg or SmootherConfig()
    params = params or VehicleParams()
    cfg = cfg or MissionConfig()
    world = np.asarray(world, dtype=float).reshape(-1, 3)
    goal = np.asarray(goal, dtype=float)
    start = np.asarray(start, dtype=float)
    p = start[0:3].copy()
    v = start[3:6].copy() if start.shape[0] >= 6 else np.zeros(3)
    yaw = 0.0
    d_safe = planner_cfg.d_safe

    truth = build_instance_map(world, p, math.inf, cfg.inflation)
    buffer = MapBuffer()
    log = MissionLog(states=[S.WAIT.value])
    state = S.WAIT
    plan: _Plan | None = None
    attempts = 0
    sudden = set(cfg.sudden_change_ticks)

    def record(tick, event):
        nonlocal state
        log.events.append((tick, event.value))
        state = transition(state, event)
        log.states.append(state.value)

    for tick in range(cfg.max_ticks):
        snapshot_id = buffer.rebuild(world, p, cfg.map_radius, cfg.inflation)
        _, local_map = buffer.snapshot()
        v_cmd = np.zeros(3)
        yaw_cmd = yaw

        if state is S.WAIT:
            if np.linalg.norm(goal - p) <= cfg.goal_tolerance:
                log.outcome = "reached"
                break
            if truth.signed_distance(goal) < d_safe:
                record(tick, E.NO_GOAL)
                log.outcome, log.reason = "goal_occupied", "goal occupied"
                break
            record(tick, E.HAVE_GOAL)
            attempts = 0

        elif state is S.GEN:
            episode = len(log.episodes)
            plan_d_safe = d_safe + cfg.plan_margin
            here = local_map.signed_distance(p)
            if here < plan_d_safe:
                plan_d_safe = max(0.0, here - 1e-3)
            pcfg = replace(planner_cfg, seed=_episode_seed(planner_cfg.seed, episode, attempts), d_safe=plan_d_safe)
            entry = {"tick": tick, "snapshot_id": snapshot_id, "attempt": attempts, "start": p.tolist()}
            try:
                bounds = Bounds.around(p, goal, margin=cfg.bounds_margin)
                selected, candidates = plan_and_select(local_map, p, goal, pcfg, bounds)
                x0 = np.concatenate([p, v, np.zeros(6)])
                segments = smooth_path(selected, x0, local_map, smoother_cfg, params)
                _, xs = stack_segments(segments)
                spline = fit_bspline(xs[:, 0:3], cfg.speed)
                new_plan = _Plan(spline, xs[-1, 0:3].copy())
                ok = not _unsafe(local_map, _window(new_plan, spline.duration, cfg.lookahead_step), d_safe)
                entry.update(
                    waypoints=selected.waypoints.tolist(),
                    path_length=selected.length,
                    trajectory_length=spline_length(spline),
                    candidate_costs=[c.cost for c in candidates],
                    snapshot_after=buffer.snapshot()[0],
                )
            except (PathNotFound, AllPlannersFailed, RiccatiFailure) as exc:
                ok = False
                entry["error"] = type(exc).__name__
            entry["success"] = ok
            log.episodes.append(entry)
            if ok:
                plan = new_plan
                record(tick, E.PLAN_SUCCESS)
            else:
                attempts += 1
                if attempts >= cfg.max_plan_attempts:
                    record(tick, E.PLAN_CANNOT_BE_FOUND)
                    log.outcome, log.reason = "no_path", "plan cannot be found"
                    break
                record(tick, E.PLAN_NOT_SUCCESS)

        elif state is S.EXEC:
            plan.t += cfg.dt
            t = min(plan.t, plan.spline.duration)
            pos_d, vel_d, _ = sample(plan.spline, t)
            if plan.t >= plan.spline.duration:
                vel_d = np.zeros(3)
            speed = float(np.linalg.norm(vel_d))
            yaw_d = math.atan2(vel_d[1], vel_d[0]) if speed > 1e-6 else yaw
            desired = Odometry(pos_d, vel_d, yaw_d, tick * cfg.dt)
            actual = Odometry(p, v, yaw, tick * cfg.dt)
            v_cmd, yaw_cmd = pd_command(actual, desired, cfg.gains)
            if tick in sudden:
                record(tick, E.SUDDEN_CHANGE)
                v_cmd = np.zeros(3)
                plan = None
            elif plan.t >= plan.spline.duration and np.linalg.norm(plan.end - p) <= cfg.goal_tolerance:
                record(tick, E.GOAL_REACHED)
                plan = None
            elif _unsafe(local_map, _window(plan, cfg.lookahead, cfg.lookahead_step), d_safe):
                record(tick, E.COLLISION_DETECTED)
                v_cmd = np.zeros(3)
                plan = None
            else:
                record(tick, E.IN_PROGRESS)

        alpha = cfg.dt / cfg.tau
        v = v + (v_cmd - v) * alpha
        yaw = wrap_angle(yaw + wrap_angle(yaw_cmd - yaw) * alpha)
        p = p + v * cfg.dt
        log.executed.append(p.tolist())
    else:
        log.outcome, log.reason = "timeout", "tick limit reached"
        log.min_clearance = truth.min_clearance(np.array(log.executed)) if log.executed else math.inf
        raise MissionTimeout(log)

    log.min_clearance = truth.min_clearance(np.array(log.executed)) if log.executed else math.inf
    return log
