"""Plain-text point, waypoint and trajectory formats.

* point cloud / waypoints: one ``x y z`` triple per line (meters); blank
  lines and ``#`` comments are ignored.
* trajectory rows: ``t x y z vx vy vz`` per line.
"""

from __future__ import annotations

import numpy as np


def read_points(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'x y z', got {line!r}")
            rows.append([float(v) for v in parts])
    pts = np.array(rows, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{path}: non-finite coordinates")
    return pts


def format_points(pts) -> str:
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    return "".join(f"{x:.9f} {y:.9f} {z:.9f}\n" for x, y, z in pts)


def write_points(path, pts) -> None:
    with open(path, "w") as fh:
        fh.write(format_points(pts))


def write_trajectory(path, times, states) -> None:
    """Time-stamped ``t x y z vx vy vz`` rows from (N, >=6) state rows."""
    states = np.asarray(states, dtype=float)
    with open(path, "w") as fh:
        fh.write("# t x y z vx vy vz\n")
        for t, s in zip(times, states):
            fh.write(" ".join(f"{v:.9f}" for v in (t, *s[0:6])) + "\n")


def read_trajectory(path) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=2)
