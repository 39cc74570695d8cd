import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from mavplan import kernels
from mavplan.dynamics import (VehicleParams, f_continuous, hover_control, linearize, make_state,
                              rk4_step, rollout, rotation_matrix)

from conftest import random_control, random_state


def test_hover_is_equilibrium(params):
    x = make_state(p=(1.0, -2.0, 3.0))
    u = hover_control(params)
    assert np.max(np.abs(f_continuous(x, u, params))) < 1e-12
    assert np.max(np.abs(rk4_step(x, u, 0.05, params) - x)) < 1e-12


def test_singular_rotation_rate_is_w(params):
    x = make_state(w=(0.0, 0.0, 1.0))
    xdot = f_continuous(x, np.zeros(4), params)
    np.testing.assert_allclose(xdot[6:9], [0.0, 0.0, 1.0], atol=1e-15)


def test_free_fall_closed_form():
    p = VehicleParams(k_v=0.0)
    x = rk4_step(make_state(), np.zeros(4), 0.1, p)
    assert x[5] == pytest.approx(-0.981, abs=1e-12)
    assert x[2] == pytest.approx(-0.5 * 9.81 * 0.01, abs=1e-12)


def test_thrust_is_total_rotor_sum(params):
    u = np.array([0.1, 0.7, 0.2, 0.4])
    xdot = f_continuous(make_state(), u, params)
    assert xdot[5] == pytest.approx(u.sum() / params.m - params.g, abs=1e-14)


def test_torques(params):
    u = np.array([0.1, 0.7, 0.2, 0.4])
    wdot = f_continuous(make_state(), u, params)[9:12]
    J = np.diag(params.J)
    tau = np.array([params.rho * (u[1] - u[3]), params.rho * (u[2] - u[0]), params.k_m * (u[0] - u[1] + u[2] - u[3])])
    np.testing.assert_allclose(wdot, tau / np.diag(J), rtol=1e-13)


@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3))
def test_rotation_matrix_orthonormal(r):
    R = rotation_matrix(np.array(r))
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_rotation_matrix_matches_scipy(r):
    np.testing.assert_allclose(rotation_matrix(np.array(r)), Rotation.from_rotvec(r).as_matrix(), atol=1e-12)


def test_principal_axis_spin_has_no_coupling():
    p = VehicleParams(J=(2e-3, 2e-3, 2e-3))
    for axis in np.eye(3):
        x = make_state(w=3.0 * axis)
        assert np.max(np.abs(f_continuous(x, np.zeros(4), p)[9:12])) < 1e-14


def _attitude_after(r0, w, T, steps):
    """Integrate r' alone for constant body rate w with fine RK4."""
    h = T / steps
    r = np.array(r0, dtype=float)
    for _ in range(steps):
        k1 = kernels.rotvec_rate(r, w)
        k2 = kernels.rotvec_rate(r + 0.5 * h * k1, w)
        k3 = kernels.rotvec_rate(r + 0.5 * h * k2, w)
        k4 = kernels.rotvec_rate(r + h * k3, w)
        r = r + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return r


def test_rotvec_kinematics_quaternion_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        axis = rng.normal(size=3)
        r0 = axis / np.linalg.norm(axis) * 0.3
        w = rng.uniform(-1, 1, 3)
        T = 0.2
        # quaternion oracle: body-rate attitude propagation is right-multiplication
        q = Rotation.from_rotvec(r0) * Rotation.from_rotvec(w * T)
        r = _attitude_after(r0, w, T, 40)
        err = np.max(np.abs(Rotation.from_rotvec(r).as_matrix() - q.as_matrix()))
        assert err < 1e-6
        # numeric derivative of the quaternion path at t=0 vs closed-form rate
        h = 1e-6
        qp = (Rotation.from_rotvec(r0) * Rotation.from_rotvec(w * h)).as_rotvec()
        qm = (Rotation.from_rotvec(r0) * Rotation.from_rotvec(-w * h)).as_rotvec()
        np.testing.assert_allclose(kernels.rotvec_rate(r0, w), (qp - qm) / (2 * h), atol=1e-6)


@pytest.mark.parametrize("mag", [0.0, 1e-6, 0.5e-4, 0.99e-4, 1.01e-4, 2e-4, 1e-2])
def test_rate_near_series_threshold(mag):
    w = np.array([0.3, -0.2, 0.5])
    r0 = np.array([1.0, 2.0, -1.0]) / np.sqrt(6) * mag
    h = 1e-6
    qp = (Rotation.from_rotvec(r0) * Rotation.from_rotvec(w * h)).as_rotvec()
    qm = (Rotation.from_rotvec(r0) * Rotation.from_rotvec(-w * h)).as_rotvec()
    np.testing.assert_allclose(kernels.rotvec_rate(r0, w), (qp - qm) / (2 * h), atol=1e-8)


def _order(errors):
    return np.log2(errors[:-1] / errors[1:])


def test_rk4_order(params):
    rng = np.random.default_rng(0)
    for x, u in [(make_state(), np.zeros(4)), (random_state(rng), random_control(rng, params))]:
        T = 0.4
        ref = rollout(x, np.tile(u, (64, 1)), T / 64, params)[-1]
        errs = []
        for n in (1, 2, 4, 8):
            xn = rollout(x, np.tile(u, (n, 1)), T / n, params)[-1]
            errs.append(np.max(np.abs(xn - ref)))
        errs = np.array(errs)
        if errs[0] < 1e-13:
            continue
        assert np.all(_order(errs) >= 3.8), errs


def test_hover_linearization_blocks(params):
    dt = 0.05
    lin = linearize(make_state(), hover_control(params), dt, params)
    np.testing.assert_allclose(lin.A[0:3, 3:6], dt * np.eye(3), atol=dt * dt)
    np.testing.assert_allclose(lin.B[5, :], dt / params.m, rtol=2 * params.k_v * dt / params.m + 1e-6)


def test_jacobian_convergence_order(params):
    rng = np.random.default_rng(1)
    dt = 0.05
    for _ in range(5):
        x, u = random_state(rng), random_control(rng, params)
        exact = linearize(x, u, dt, params, eps=1e-5)
        errs = []
        for eps in (4e-2, 2e-2, 1e-2):
            lin = linearize(x, u, dt, params, eps=eps)
            errs.append(max(np.max(np.abs(lin.A - exact.A)), np.max(np.abs(lin.B - exact.B))))
        assert np.all(_order(np.array(errs)) >= 1.9), errs


def test_taylor_remainder(params):
    rng = np.random.default_rng(2)
    dt = 0.05
    for _ in range(20):
        x, u = random_state(rng), random_control(rng, params)
        lin = linearize(x, u, dt, params)
        d = rng.normal(size=16)
        d *= 1e-3 / np.linalg.norm(d)
        true = rk4_step(x + d[:12], u + d[12:], dt, params)
        pred = lin.predict(x + d[:12], u + d[12:])
        assert np.max(np.abs(pred - true)) / max(1.0, np.max(np.abs(true))) < 1e-5


def test_linearize_is_exact_at_point(params):
    rng = np.random.default_rng(4)
    x, u = random_state(rng), random_control(rng, params)
    lin = linearize(x, u, 0.05, params)
    np.testing.assert_array_equal(lin.predict(x, u), rk4_step(x, u, 0.05, params))


@pytest.mark.parametrize("bad", [dict(m=0.0), dict(rho=-1.0), dict(g=0.0), dict(J=(1e-3, -1e-3, 1e-3))])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        VehicleParams(**bad)


@settings(max_examples=25)
@given(st.integers(0, 2**31))
def test_rollout_matches_stepping(seed):
    p = VehicleParams()
    rng = np.random.default_rng(seed)
    x = random_state(rng)
    us = np.array([random_control(rng, p) for _ in range(5)])
    xs = rollout(x, us, 0.05, p)
    for k in range(5):
        np.testing.assert_array_equal(xs[k + 1], rk4_step(xs[k], us[k], 0.05, p))
