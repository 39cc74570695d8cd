import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mavplan.search_space import (Bounds, Ellipsoid, build_search_space, generate_interior_points, lattice_counts,
                                  rotation_between)

Z = np.array([0.0, 0.0, 1.0])
coords = st.floats(-30, 30, allow_nan=False)
vec3 = st.tuples(coords, coords, coords).map(np.array)


def containment_level(e: Ellipsoid, pts):
    # inverse rotation written out with an explicit transpose, independent of Ellipsoid.local
    local = (np.linalg.inv(e.R) @ (pts - e.c).T).T
    return np.sum((local / e.r) ** 2, axis=1)


def test_axis_aligned_goal():
    e = build_search_space((0, 0, 0), (10, 0, 0))
    np.testing.assert_allclose(e.c, [5, 0, 0])
    np.testing.assert_allclose(e.r, [10, 4, 4])


def test_parallel_and_degenerate_directions():
    e = build_search_space((0, 0, 0), (0, 0, 2))
    np.testing.assert_allclose(e.r, [4, 4, 4])
    np.testing.assert_array_equal(e.R, np.eye(3))
    e = build_search_space((1, 1, 1), (1, 1, 1))
    np.testing.assert_allclose(e.c, [1, 1, 1])
    np.testing.assert_allclose(e.r, [4, 4, 4])
    np.testing.assert_array_equal(e.R, np.eye(3))


def test_negative_components_use_magnitude():
    e = build_search_space((0, 0, 0), (-7, 5, -9))
    np.testing.assert_allclose(e.r, [7, 5, 9])


def test_rotation_examples():
    np.testing.assert_array_equal(rotation_between(Z, (0, 0, 5)), np.eye(3))
    np.testing.assert_array_equal(rotation_between(Z, (0, 0, -1)), np.diag([1.0, -1.0, -1.0]))
    R = rotation_between(Z, (1, 0, 0))
    np.testing.assert_allclose(R @ Z, [1, 0, 0], atol=1e-12)
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12


@given(vec3)
def test_rotation_properties(r):
    R = rotation_between(Z, r)
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
    n = np.linalg.norm(r)
    if n > 1e-6:
        np.testing.assert_allclose(R @ Z, r / n, atol=1e-12)


def test_unit_sphere_lattice():
    e = Ellipsoid(np.zeros(3), np.full(3, 4.0), np.eye(3))
    pts = generate_interior_points(e, 1).points
    h = 8.0 / 3.0
    for q in [(0, 0, 0), (h, 0, 0), (-h, 0, 0)]:
        assert np.any(np.all(np.isclose(pts, q, atol=1e-12), axis=1))
    assert not np.any(np.all(np.isclose(pts, (h, h, h), atol=1e-12), axis=1))
    # brute enumeration of the full signed lattice
    idx = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)], float) * h
    expected = idx[np.sum(idx**2, axis=1) <= 16.0]
    assert len(pts) == len(expected)


def test_lattice_counts_normalized_by_min_axis():
    h, counts = lattice_counts([10.0, 4.0, 6.0], 8)
    assert h == pytest.approx(8.0 / 17.0)
    np.testing.assert_array_equal(counts, [20, 8, 12])


def test_default_density():
    e = Ellipsoid(np.zeros(3), np.full(3, 4.0), np.eye(3))
    assert 2000 <= len(generate_interior_points(e)) <= 5000


def test_determinism_and_immutability():
    e = build_search_space((1, 2, 3), (9, -4, 7))
    a, b = generate_interior_points(e), generate_interior_points(e)
    assert a.points.tobytes() == b.points.tobytes()
    with pytest.raises(ValueError):
        a.points[0, 0] = 1.0


def test_symmetry_about_center():
    b = Bounds(np.zeros(3), np.full(3, 20.0))
    e = Ellipsoid(b.center, np.array([6.0, 4.0, 5.0]), np.eye(3))
    pts = generate_interior_points(e, 4, b).points
    key = {tuple(np.round(p - b.center, 9)) for p in pts}
    for sign in np.eye(3) * -2 + 1:
        assert {tuple(np.round(np.array(k) * sign, 9) + 0.0) for k in key} == key


def test_bounds_filter():
    b = Bounds(np.zeros(3), np.full(3, 5.0))
    e = build_search_space((1, 1, 1), (4, 4, 4))
    pts = generate_interior_points(e, 6, b).points
    assert len(pts) > 0
    assert np.all(b.contains(pts))


@settings(max_examples=60)
@given(vec3, vec3, st.integers(1, 6))
def test_containment(start, goal, n):
    e = build_search_space(start, goal)
    assert np.all(e.r >= 4.0)
    pts = generate_interior_points(e, n).points
    assert len(pts) > 0
    assert np.all(containment_level(e, pts) <= 1 + 1e-9)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        build_search_space((np.inf, 0, 0), (1, 1, 1))
    with pytest.raises(ValueError):
        Bounds((0, 0, 0), (1, 0, 1))
    with pytest.raises(ValueError):
        generate_interior_points(build_search_space((0, 0, 0), (1, 0, 0)), 0)
