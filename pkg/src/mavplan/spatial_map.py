"""Instance map: a per-scan spatial index over occupied points near the vehicle.

The index is a ``scipy.spatial.cKDTree`` over the points that fall inside a
ball of ``radius`` around ``center``. Obstacles are point samples; the
``inflation`` margin turns point distance into a conservative clearance.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_RADIUS = 4.0
DEFAULT_INFLATION = 0.3
SHELL_SPACING = 0.3


@dataclass(frozen=True)
class WorldSpec:
    n_obstacles: int = 50
    cube_size: float = 20.0
    obstacle_radius: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_obstacles < 0:
            raise ValueError("n_obstacles must be >= 0")
        if self.cube_size <= 0:
            raise ValueError("cube_size must be > 0")
        if self.obstacle_radius < 0:
            raise ValueError("obstacle_radius must be >= 0")


def _as_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, 3))
    pts = pts.reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite coordinates")
    return pts


class InstanceMap:
    """Immutable nearest-obstacle index; safe to share between threads."""

    def __init__(self, points, center, radius: float = DEFAULT_RADIUS, inflation: float = DEFAULT_INFLATION):
        if not radius > 0:
            raise ValueError("radius must be > 0")
        if inflation < 0:
            raise ValueError("inflation must be >= 0")
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.radius = float(radius)
        self.inflation = float(inflation)
        pts = _as_cloud(points)
        if len(pts):
            pts = pts[np.linalg.norm(pts - self.center, axis=1) <= self.radius]
            # canonical order so every query is independent of insertion order
            pts = pts[np.lexsort(pts.T[::-1])]
        pts.setflags(write=False)
        self.points = pts
        self._tree = cKDTree(pts) if len(pts) else None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return self._tree is None

    def nearest(self, p):
        """Distance to and index of the closest indexed point (inf, -1 when empty)."""
        if self._tree is None:
            return math.inf, -1
        d, i = self._tree.query(np.asarray(p, dtype=float).reshape(3))
        return float(d), int(i)

    def signed_distance(self, p) -> float:
        return self.nearest(p)[0] - self.inflation

    def signed_distances(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        if self._tree is None:
            return np.full(len(pts), math.inf)
        d, _ = self._tree.query(pts)
        return d - self.inflation

    def neighbors_within(self, p, dist: float) -> np.ndarray:
        """Indexed points within ``dist`` of ``p`` (sorted by index, so deterministic)."""
        if self._tree is None:
            return np.zeros((0, 3))
        idx = self._tree.query_ball_point(np.asarray(p, dtype=float).reshape(3), dist)
        return self.points[np.sort(np.asarray(idx, dtype=np.int64))]

    def is_clear(self, pts, clearance: float) -> bool:
        """True iff every point has signed distance >= ``clearance``."""
        if self._tree is None:
            return True
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        bound = clearance + self.inflation
        if bound <= 0:
            return True
        d, _ = self._tree.query(pts, distance_upper_bound=bound * (1 + 1e-9) + 1e-12)
        return bool(np.all(d - self.inflation >= clearance))

    def segment_clear(self, a, b, step: float, clearance: float) -> bool:
        if step <= 0:
            raise ValueError("step must be > 0")
        if self._tree is None:
            return True
        return self.is_clear(segment_samples(a, b, step), clearance)

    def min_clearance(self, pts) -> float:
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            return math.inf
        return float(np.min(self.signed_distances(pts)))


def segment_samples(a, b, step: float) -> np.ndarray:
    """Evenly spaced samples on [a, b], endpoints included, spacing <= step."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return a + t * (b - a)


def build_instance_map(cloud, center, radius: float = DEFAULT_RADIUS, inflation: float = DEFAULT_INFLATION) -> InstanceMap:
    return InstanceMap(cloud, center, radius, inflation)


def signed_distance(m: InstanceMap, p) -> float:
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("query point must be finite")
    return m.signed_distance(p)


def segment_clear(m: InstanceMap, a, b, step: float, clearance: float) -> bool:
    return m.segment_clear(a, b, step, clearance)


class MapBuffer:
    """Double buffer: planners read ``previous`` while ``current`` is rebuilt.

    ``snapshot()`` hands out the published map and its id; publication is a
    single reference swap under a lock, so a reader never sees a half-built map.
    """

    def __init__(self, initial: InstanceMap | None = None):
        self._lock = threading.Lock()
        self._previous = initial if initial is not None else InstanceMap([], np.zeros(3), DEFAULT_RADIUS)
        self._id = 0
        self.current: InstanceMap | None = None

    @property
    def previous(self) -> InstanceMap:
        return self.snapshot()[1]

    def snapshot(self) -> tuple[int, InstanceMap]:
        with self._lock:
            return self._id, self._previous

    def rebuild(self, cloud, center, radius: float = DEFAULT_RADIUS, inflation: float = DEFAULT_INFLATION) -> int:
        self.current = build_instance_map(cloud, center, radius, inflation)
        return self.swap()

    def swap(self) -> int:
        if self.current is None:
            raise RuntimeError("nothing to publish")
        with self._lock:
            self._previous, self.current = self.current, None
            self._id += 1
            return self._id


def _sphere_directions(k: int) -> np.ndarray:
    i = np.arange(k) + 0.5
    z = 1.0 - 2.0 * i / k
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    s = np.sqrt(1.0 - z * z)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def obstacle_points(center, radius: float) -> np.ndarray:
    """Center point plus a Fibonacci shell at ``radius``."""
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        return center.reshape(1, 3)
    k = max(8, int(math.ceil(4.0 * math.pi * radius * radius / SHELL_SPACING**2)))
    return np.vstack([center, center + radius * _sphere_directions(k)])


def random_obstacle_centers(spec: WorldSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    return rng.uniform(0.0, spec.cube_size, size=(spec.n_obstacles, 3))


def random_world(spec: WorldSpec, keep_out=(), keep_out_radius: float = 0.0) -> np.ndarray:
    """Point cloud of ``spec.n_obstacles`` spherical obstacles, deterministic per seed.

    Obstacles whose center lies within ``keep_out_radius`` of any ``keep_out``
    point are dropped (used to keep benchmark start/goal poses free).
    """
    centers = random_obstacle_centers(spec)
    keep_out = np.asarray(keep_out, dtype=float).reshape(-1, 3)
    if len(keep_out) and len(centers):
        d = np.linalg.norm(centers[:, None, :] - keep_out[None, :, :], axis=2)
        centers = centers[np.all(d > keep_out_radius, axis=1)]
    if len(centers) == 0:
        return np.zeros((0, 3))
    return np.vstack([obstacle_points(c, spec.obstacle_radius) for c in centers])
