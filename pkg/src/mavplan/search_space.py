"""Adaptive ellipsoidal search space and its deterministic interior lattice."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MIN_SEMI_AXIS = 4.0
DEGENERATE_DIRECTION = 1e-6
DEFAULT_LATTICE_N = 8

Z_AXIS = np.array([0.0, 0.0, 1.0])

_OCTANTS = np.array(list(itertools.product((1, -1), repeat=3)), dtype=np.int64)


@dataclass(frozen=True)
class Bounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if not np.all(hi > lo):
            raise ValueError("bounds must satisfy hi > lo on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def around(cls, *points, margin: float) -> Bounds:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(pts.min(axis=0) - margin, pts.max(axis=0) + margin)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)


@dataclass(frozen=True)
class Ellipsoid:
    c: np.ndarray
    r: np.ndarray
    R: np.ndarray

    def local(self, pts) -> np.ndarray:
        """Coordinates of ``pts`` in the ellipsoid frame (inverse-rotated about c)."""
        return (np.asarray(pts, dtype=float).reshape(-1, 3) - self.c) @ self.R

    def level(self, pts) -> np.ndarray:
        """Left-hand side of the ellipsoid equation; <= 1 inside."""
        return np.sum((self.local(pts) / self.r) ** 2, axis=1)

    def contains(self, pts, tol: float = 1e-9) -> np.ndarray:
        return self.level(pts) <= 1.0 + tol


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray
    n: int

    def __len__(self) -> int:
        return len(self.points)


def rotation_between(z_axis, r) -> np.ndarray:
    """Rotation taking unit vector ``z_axis`` onto the direction of ``r``.

    Identity when ``r`` is (near) zero or parallel; a half-turn about x when
    antiparallel.
    """
    a = np.asarray(z_axis, dtype=float)
    a = a / np.linalg.norm(a)
    r = np.asarray(r, dtype=float)
    norm = np.linalg.norm(r)
    if norm < DEGENERATE_DIRECTION:
        return np.eye(3)
    b = r / norm
    v = np.cross(a, b)
    s = np.linalg.norm(v)
    c = float(np.dot(a, b))
    if s < 1e-12:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    K = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    R = np.eye(3) + K + K @ K * ((1.0 - c) / (s * s))
    # one polar cleanup keeps R orthonormal to machine precision
    u, _, vt = np.linalg.svd(R)
    return u @ vt


def build_search_space(start, goal, bounds: Bounds | None = None) -> Ellipsoid:
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if not (np.all(np.isfinite(start)) and np.all(np.isfinite(goal))):
        raise ValueError("start and goal must be finite")
    d = goal - start
    c = 0.5 * (start + goal)
    r = np.maximum(MIN_SEMI_AXIS, np.abs(d))
    if np.linalg.norm(d) < DEGENERATE_DIRECTION:
        return Ellipsoid(c, np.full(3, MIN_SEMI_AXIS), np.eye(3))
    return Ellipsoid(c, r, rotation_between(Z_AXIS, d))


def lattice_counts(r, n: int) -> tuple[float, np.ndarray]:
    """Lattice step and per-axis index counts; all ratios normalized by min(r)."""
    r = np.asarray(r, dtype=float)
    r_min = float(r.min())
    h = 2.0 * r_min / (2 * n + 1)
    counts = np.floor(n * r / r_min + 1e-9).astype(np.int64)
    return h, counts


def generate_interior_points(e: Ellipsoid, n: int = DEFAULT_LATTICE_N, bounds: Bounds | None = None) -> SampleSet:
    """Octant-mirrored lattice over the ellipsoid interior.

    Non-negative index triples (i, j, k) up to the per-axis counts are mirrored
    into all eight sign octants, deduplicated, mapped through ``c + R @ (h*idx)``
    and filtered by ellipsoid containment and ``bounds``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h, counts = lattice_counts(e.r, n)
    grids = np.meshgrid(*(np.arange(c + 1) for c in counts), indexing="ij")
    base = np.column_stack([g.ravel() for g in grids])
    idx = (base[:, None, :] * _OCTANTS[None, :, :]).reshape(-1, 3)
    idx = np.unique(idx, axis=0)
    offsets = idx * h
    inside = np.sum((offsets / e.r) ** 2, axis=1) <= 1.0
    pts = e.c + offsets[inside] @ e.R.T
    if bounds is not None:
        pts = pts[bounds.contains(pts)]
    pts = np.ascontiguousarray(pts)
    pts.setflags(write=False)
    return SampleSet(pts, n)

