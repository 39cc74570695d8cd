"""Clamped uniform cubic B-spline time law over smoothed waypoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGREE = 3


class OutOfDomain(ValueError):
    pass


@dataclass(frozen=True)
class BSpline:
    knots: np.ndarray
    control_points: np.ndarray
    duration: float
    degree: int = DEGREE

    def __post_init__(self):
        if len(self.knots) != len(self.control_points) + self.degree + 1:
            raise ValueError("knot count must equal control count + degree + 1")
        if np.any(np.diff(self.knots) < 0):
            raise ValueError("knots must be non-decreasing")

    @property
    def interior_knots(self) -> np.ndarray:
        p = self.degree
        return self.knots[p + 1 : len(self.knots) - p - 1]

    def __call__(self, t):
        return sample(self, t)


def clamped_uniform_knots(n_ctrl: int, degree: int = DEGREE) -> np.ndarray:
    inner = np.linspace(0.0, 1.0, n_ctrl - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


def fit_bspline(waypoints, speed: float = 1.5) -> BSpline:
    """Cubic clamped spline with the waypoints as control points.

    Fewer than four waypoints are padded by repeating the end points.
    Duration is polyline length / speed (1 s for a zero-length path).
    """
    if speed <= 0:
        raise ValueError("speed must be > 0")
    ctrl = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(ctrl) < 2:
        raise ValueError("need at least two waypoints")
    length = float(np.sum(np.linalg.norm(np.diff(ctrl, axis=0), axis=1)))
    while len(ctrl) < DEGREE + 1:
        ctrl = np.vstack([ctrl[:1], ctrl, ctrl[-1:]])
    ctrl = np.ascontiguousarray(ctrl)
    duration = length / speed if length > 0 else 1.0
    return BSpline(clamped_uniform_knots(len(ctrl)), ctrl, duration)


def find_span(knots, degree: int, u: float) -> int:
    """Index i with knots[i] <= u < knots[i+1]; the last non-empty span at the right end."""
    n = len(knots) - degree - 1
    if u >= knots[n]:
        return n - 1
    return int(np.searchsorted(knots, u, side="right") - 1)


def de_boor(knots, ctrl, degree: int, u: float, span: int | None = None) -> np.ndarray:
    k = find_span(knots, degree, u) if span is None else span
    d = [ctrl[j + k - degree].copy() for j in range(degree + 1)]
    for r in range(1, degree + 1):
        for j in range(degree, r - 1, -1):
            i = j + k - degree
            denom = knots[i + degree + 1 - r] - knots[i]
            alpha = 0.0 if denom == 0 else (u - knots[i]) / denom
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j]
    return d[degree]


def derivative_spline(knots, ctrl, degree: int):
    """Knots and control points of the first-derivative spline (in knot parameter)."""
    denom = knots[degree + 1 : degree + len(ctrl)] - knots[1 : len(ctrl)]
    diff = np.diff(ctrl, axis=0)
    safe = np.where(denom > 0, denom, 1.0)
    q = np.where((denom > 0)[:, None], degree * diff / safe[:, None], 0.0)
    return knots[1:-1], q, degree - 1


def _eval(s: BSpline, u: float, span: int | None = None):
    kn, cp, p = s.knots, s.control_points, s.degree
    pos = de_boor(kn, cp, p, u, span)
    k1, c1, p1 = derivative_spline(kn, cp, p)
    k2, c2, p2 = derivative_spline(k1, c1, p1)
    sp1 = None if span is None else span - 1
    vel = de_boor(k1, c1, p1, u, sp1)
    acc = de_boor(k2, c2, p2, u, None if span is None else span - 2)
    scale = 1.0 / s.duration
    return pos, vel * scale, acc * scale * scale


def sample(s: BSpline, t: float):
    """(position, velocity, acceleration) at time ``t`` in [0, duration]."""
    if not (0.0 <= t <= s.duration):
        raise OutOfDomain(f"t={t} outside [0, {s.duration}]")
    return _eval(s, t / s.duration)


def sample_at_knot(s: BSpline, knot_index: int, side: str):
    """Evaluate exactly at ``knots[knot_index]`` using the span on the given side."""
    u = s.knots[knot_index]
    span = knot_index - 1 if side == "left" else knot_index
    return _eval(s, u, span)


def sample_many(s: BSpline, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    out = [sample(s, float(t)) for t in times]
    return tuple(np.array(v) for v in zip(*out))


def length(s: BSpline, n: int = 200) -> float:
    pos, _, _ = sample_many(s, np.linspace(0.0, s.duration, n + 1))
    return float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))
