"""iLQR smoothing of a geometric path into a dynamically feasible trajectory.

Each segment solves a finite-horizon problem: quadratic tracking of a hover
reference at the segment target plus an exponential obstacle penalty
``q * sum_i exp(-d_i(x))`` over indexed points within ``d_active``. States
are always produced by the RK4 rollout, so every returned segment satisfies
the dynamics exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import DEFAULT_FD_EPS, VehicleParams, hover_control
from .kernels import NU, NX
from .spatial_map import InstanceMap

LINE_SEARCH = tuple(0.5**i for i in range(7))


class RiccatiFailure(RuntimeError):
    def __init__(self, message: str, segment: int | None = None):
        super().__init__(message if segment is None else f"segment {segment}: {message}")
        self.segment = segment


def _default_q_diag():
    return (1.0,) * 3 + (0.1,) * 3 + (0.01,) * 6


@dataclass(frozen=True)
class SmootherConfig:
    dt: float = 0.05
    horizon_steps: int | None = None
    v_nom: float = 1.5
    min_steps: int = 10
    q_stage: tuple = field(default_factory=_default_q_diag)
    final_scale: float = 50.0
    r_ctrl: tuple = (0.1, 0.1, 0.1, 0.1)
    q: float = 50.0
    d_active: float = 3.0
    max_iter: int = 50
    cost_tol: float = 1e-4
    reg0: float = 1e-6
    reg_max: float = 1e10
    fd_eps: float = DEFAULT_FD_EPS

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.horizon_steps is not None and self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        if len(self.q_stage) != NX or min(self.q_stage) < 0 or self.final_scale < 0:
            raise ValueError("q_stage must be 12 non-negative weights")
        if len(self.r_ctrl) != NU or min(self.r_ctrl) <= 0:
            raise ValueError("r_ctrl must be 4 positive weights")
        if self.q < 0:
            raise ValueError("q must be >= 0")

    @property
    def Q_stage(self) -> np.ndarray:
        return np.diag(np.asarray(self.q_stage, dtype=float))

    @property
    def Q_final(self) -> np.ndarray:
        return self.final_scale * self.Q_stage

    @property
    def R_ctrl(self) -> np.ndarray:
        return np.diag(np.asarray(self.r_ctrl, dtype=float))

    def steps_for(self, distance: float) -> int:
        if self.horizon_steps is not None:
            return self.horizon_steps
        return max(self.min_steps, int(math.ceil(distance / (self.v_nom * self.dt))))


@dataclass
class TrajectorySegment:
    states: np.ndarray
    controls: np.ndarray
    dt: float
    total_cost: float
    iterations: int
    cost_history: list
    goal: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.states)) * self.dt

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, 0:3]


def reference_state(p_goal) -> np.ndarray:
    x = np.zeros(NX)
    x[0:3] = p_goal
    return x


def obstacle_cost(p, m: InstanceMap, cfg: SmootherConfig) -> float:
    if cfg.q == 0 or m.empty:
        return 0.0
    pts = m.neighbors_within(p, cfg.d_active)
    if len(pts) == 0:
        return 0.0
    d = np.linalg.norm(pts - p, axis=1) - m.inflation
    return float(cfg.q * np.sum(np.exp(-d)))


def obstacle_derivatives(p, m: InstanceMap, cfg: SmootherConfig):
    """Gradient and Gauss-Newton Hessian of the obstacle term w.r.t. position."""
    grad = np.zeros(3)
    hess = np.zeros((3, 3))
    if cfg.q == 0 or m.empty:
        return grad, hess
    pts = m.neighbors_within(p, cfg.d_active)
    if len(pts) == 0:
        return grad, hess
    diff = p - pts
    dist = np.linalg.norm(diff, axis=1)
    ok = dist > 1e-12
    w = cfg.q * np.exp(-(dist[ok] - m.inflation))
    n = diff[ok] / dist[ok, None]
    grad = -(w[:, None] * n).sum(axis=0)
    hess = (w[:, None, None] * n[:, :, None] * n[:, None, :]).sum(axis=0)
    return grad, hess


def stage_cost(x, u, x_ref, u_ref, m: InstanceMap, cfg: SmootherConfig, final: bool = False) -> float:
    x = np.asarray(x, dtype=float)
    dx = x - np.asarray(x_ref, dtype=float)
    Q = cfg.Q_final if final else cfg.Q_stage
    c = float(dx @ Q @ dx)
    if not final:
        du = np.asarray(u, dtype=float) - np.asarray(u_ref, dtype=float)
        c += float(du @ cfg.R_ctrl @ du)
    return c + obstacle_cost(x[0:3], m, cfg)


def trajectory_cost(xs, us, x_ref, u_ref, m: InstanceMap, cfg: SmootherConfig) -> float:
    # a diverged rollout is never accepted by the line search
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(us))):
        return math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        total = sum(stage_cost(xs[k], us[k], x_ref, u_ref, m, cfg) for k in range(len(us)))
        total += stage_cost(xs[-1], None, x_ref, u_ref, m, cfg, final=True)
    return total if math.isfinite(total) else math.inf


@dataclass
class CostDerivatives:
    lx: np.ndarray
    lu: np.ndarray
    lxx: np.ndarray
    luu: np.ndarray
    lux: np.ndarray
    lx_final: np.ndarray
    lxx_final: np.ndarray


def quadratize_stage(x, u, x_ref, u_ref, m: InstanceMap, cfg: SmootherConfig, final: bool = False):
    """(lx, lu, lxx, luu, lux) of one stage; ``lu``/``luu``/``lux`` are None when ``final``."""
    x = np.asarray(x, dtype=float)
    Q = cfg.Q_final if final else cfg.Q_stage
    dx = x - x_ref
    lx = 2.0 * Q @ dx
    lxx = 2.0 * Q.copy()
    g, H = obstacle_derivatives(x[0:3], m, cfg)
    lx[0:3] += g
    lxx[0:3, 0:3] += H
    if final:
        return lx, None, lxx, None, None
    R = cfg.R_ctrl
    return lx, 2.0 * R @ (np.asarray(u) - u_ref), lxx, 2.0 * R, np.zeros((NU, NX))


def quadratize(xs, us, x_ref, u_ref, m: InstanceMap, cfg: SmootherConfig) -> CostDerivatives:
    n = len(us)
    lx = np.empty((n, NX))
    lu = np.empty((n, NU))
    lxx = np.empty((n, NX, NX))
    luu = np.empty((n, NU, NU))
    lux = np.empty((n, NU, NX))
    for k in range(n):
        lx[k], lu[k], lxx[k], luu[k], lux[k] = quadratize_stage(xs[k], us[k], x_ref, u_ref, m, cfg)
    lxf, _, lxxf, _, _ = quadratize_stage(xs[-1], None, x_ref, u_ref, m, cfg, final=True)
    return CostDerivatives(lx, lu, lxx, luu, lux, lxf, lxxf)


def riccati_backward(As, Bs, d: CostDerivatives, reg: float = 0.0):
    """Backward Riccati recursion for the local LQ problem.

    Returns ``(K, k, (dV1, dV2))`` with ``u = u_bar + alpha*k + K dx`` and an
    expected cost change ``alpha*dV1 + alpha**2*dV2``, or None when a
    regularized ``Q_uu`` is not positive definite.
    """
    n = len(As)
    nx = As.shape[1]
    nu = Bs.shape[2]
    K = np.zeros((n, nu, nx))
    kff = np.zeros((n, nu))
    Vx = d.lx_final.copy()
    Vxx = d.lxx_final.copy()
    dV1 = dV2 = 0.0
    eye = np.eye(nu)
    for t in range(n - 1, -1, -1):
        A, B = As[t], Bs[t]
        Qx = d.lx[t] + A.T @ Vx
        Qu = d.lu[t] + B.T @ Vx
        Qxx = d.lxx[t] + A.T @ Vxx @ A
        Quu = d.luu[t] + B.T @ Vxx @ B
        Qux = d.lux[t] + B.T @ Vxx @ A
        Quu = 0.5 * (Quu + Quu.T)
        try:
            L = np.linalg.cholesky(Quu + reg * eye)
        except np.linalg.LinAlgError:
            return None
        Kt = -np.linalg.solve(L.T, np.linalg.solve(L, Qux))
        kt = -np.linalg.solve(L.T, np.linalg.solve(L, Qu))
        K[t], kff[t] = Kt, kt
        Vx = Qx + Kt.T @ Quu @ kt + Kt.T @ Qu + Qux.T @ kt
        Vxx = Qxx + Kt.T @ Quu @ Kt + Kt.T @ Qux + Qux.T @ Kt
        Vxx = 0.5 * (Vxx + Vxx.T)
        dV1 += float(kt @ Qu)
        dV2 += 0.5 * float(kt @ Quu @ kt)
    return K, kff, (dV1, dV2)


def ilqr_segment(x0, p_goal, m: InstanceMap, cfg: SmootherConfig, params: VehicleParams,
                 n_steps: int | None = None) -> TrajectorySegment:
    x0 = np.ascontiguousarray(x0, dtype=float)
    p_goal = np.asarray(p_goal, dtype=float)
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(p_goal))):
        raise ValueError("x0 and p_goal must be finite")
    N = n_steps or cfg.steps_for(float(np.linalg.norm(p_goal - x0[0:3])))
    pv = params.as_array()
    u_min = params.u_min
    x_ref = reference_state(p_goal)
    u_ref = hover_control(params)

    us = np.tile(u_ref, (N, 1))
    xs = kernels.rollout(x0, us, cfg.dt, pv)
    J = trajectory_cost(xs, us, x_ref, u_ref, m, cfg)
    history = [J]
    reg = cfg.reg0
    iterations = 0
    while iterations < cfg.max_iter:
        iterations += 1
        As, Bs = kernels.linearize_trajectory(xs, us, cfg.dt, pv, cfg.fd_eps)
        derivs = quadratize(xs, us, x_ref, u_ref, m, cfg)
        accepted = False
        while True:
            bp = riccati_backward(As, Bs, derivs, reg)
            if bp is None:
                reg *= 10.0
                if reg > cfg.reg_max:
                    raise RiccatiFailure("regularization ceiling reached (Q_uu not positive definite)")
                continue
            K, kff, (dV1, dV2) = bp
            expected = -(dV1 + dV2)
            if expected <= cfg.cost_tol * 1e-3 * max(J, 1e-12):
                break
            for alpha in LINE_SEARCH:
                xs_new, us_new = kernels.feedback_rollout(x0, xs, us, K, kff, alpha, cfg.dt, pv, u_min)
                J_new = trajectory_cost(xs_new, us_new, x_ref, u_ref, m, cfg)
                if J_new < J:
                    accepted = True
                    break
            if accepted:
                break
            reg *= 10.0
            if reg > cfg.reg_max:
                raise RiccatiFailure("no cost-decreasing step before the regularization ceiling")
        if not accepted:
            break
        rel = (J - J_new) / max(J, 1e-12)
        xs, us, J = xs_new, us_new, J_new
        history.append(J)
        reg = max(cfg.reg0, reg / 10.0)
        if rel < cfg.cost_tol:
            break
    return TrajectorySegment(xs, us, cfg.dt, J, iterations, history, p_goal.copy())


def segment_targets(waypoints) -> np.ndarray:
    """Midpoints of consecutive waypoint pairs followed by the final waypoint."""
    w = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(w) <= 2:
        return w[-1:].copy()
    return np.vstack([0.5 * (w[:-1] + w[1:]), w[-1]])


def smooth_path(path, x_start, m: InstanceMap, cfg: SmootherConfig, params: VehicleParams) -> list[TrajectorySegment]:
    """Chain iLQR segments through the midpoints of consecutive waypoint pairs.

    ``path`` is a ``PathCandidate`` or an (M, 3) waypoint array. Each segment
    starts from the exact terminal state of the previous one.
    """
    waypoints = getattr(path, "waypoints", path)
    x = np.ascontiguousarray(x_start, dtype=float)
    segments = []
    for i, target in enumerate(segment_targets(waypoints)):
        try:
            seg = ilqr_segment(x, target, m, cfg, params)
        except RiccatiFailure as exc:
            raise RiccatiFailure(str(exc), segment=i) from exc
        segments.append(seg)
        x = seg.states[-1]
    return segments


def stack_segments(segments) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate segment states (shared junctions kept once) with their time stamps."""
    states = [segments[0].states]
    for seg in segments[1:]:
        states.append(seg.states[1:])
    xs = np.vstack(states)
    return np.arange(len(xs)) * segments[0].dt, xs


def max_defect(seg: TrajectorySegment, params: VehicleParams) -> float:
    pv = params.as_array()
    if len(seg.controls) == 0:
        return 0.0
    return max(
        float(np.max(np.abs(seg.states[k + 1] - kernels.rk4(seg.states[k], seg.controls[k], seg.dt, pv))))
        for k in range(len(seg.controls))
    )
