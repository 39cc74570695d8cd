"""Hot numeric kernels.

Everything here is compiled by numba when available and runs unchanged as
numpy otherwise (see ``_accel``). Vehicle parameters travel as one flat
float64 array so the kernels stay free of Python objects:

    [m, rho, k_v, k_m, g, J (9, row-major), J^-1 (9, row-major)]
"""

import numpy as np

from ._accel import njit

NX = 12
NU = 4
SMALL_ROTATION = 1e-4


@njit
def skew(a):
    out = np.zeros((3, 3))
    out[0, 1] = -a[2]
    out[0, 2] = a[1]
    out[1, 0] = a[2]
    out[1, 2] = -a[0]
    out[2, 0] = -a[1]
    out[2, 1] = a[0]
    return out


@njit
def rotvec_to_matrix(r):
    theta = np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    K = skew(r)
    eye = np.eye(3)
    if theta < 1e-8:
        return eye + K + 0.5 * (K @ K)
    s = np.sin(theta) / theta
    c = (1.0 - np.cos(theta)) / (theta * theta)
    return eye + s * K + c * (K @ K)


@njit
def rotvec_rate(r, w):
    """Rotation-vector kinematics for body-frame angular velocity ``w``."""
    theta2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2]
    theta = np.sqrt(theta2)
    K = skew(r)
    Kw = K @ w
    KKw = K @ Kw
    if theta < SMALL_ROTATION:
        coeff = 1.0 / 12.0 + theta2 / 720.0
    else:
        coeff = (1.0 - theta / (2.0 * np.tan(0.5 * theta))) / theta2
    return w + 0.5 * Kw + coeff * KKw


@njit
def dynamics_rhs(x, u, params):
    m = params[0]
    rho = params[1]
    k_v = params[2]
    k_m = params[3]
    g = params[4]
    J = params[5:14].reshape((3, 3))
    J_inv = params[14:23].reshape((3, 3))

    v = x[3:6]
    r = x[6:9]
    w = x[9:12]

    out = np.empty(NX)
    out[0:3] = v

    thrust = u[0] + u[1] + u[2] + u[3]
    R = rotvec_to_matrix(r)
    acc = (thrust * R[:, 2] - k_v * v) / m
    acc[2] -= g
    out[3:6] = acc

    out[6:9] = rotvec_rate(r, w)

    torque = np.empty(3)
    torque[0] = rho * (u[1] - u[3])
    torque[1] = rho * (u[2] - u[0])
    torque[2] = k_m * (u[0] - u[1] + u[2] - u[3])
    Jw = J @ w
    gyro = np.empty(3)
    gyro[0] = w[1] * Jw[2] - w[2] * Jw[1]
    gyro[1] = w[2] * Jw[0] - w[0] * Jw[2]
    gyro[2] = w[0] * Jw[1] - w[1] * Jw[0]
    out[9:12] = J_inv @ (torque - gyro)
    return out


@njit
def rk4(x, u, dt, params):
    k1 = dynamics_rhs(x, u, params)
    k2 = dynamics_rhs(x + 0.5 * dt * k1, u, params)
    k3 = dynamics_rhs(x + 0.5 * dt * k2, u, params)
    k4 = dynamics_rhs(x + dt * k3, u, params)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit
def rk4_jacobians(x, u, dt, params, eps):
    """Central-difference Jacobians of the RK4 map, step ``eps * max(1, |z_i|)``."""
    A = np.empty((NX, NX))
    B = np.empty((NX, NU))
    for i in range(NX):
        h = eps * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        A[:, i] = (rk4(xp, u, dt, params) - rk4(xm, u, dt, params)) / (2.0 * h)
    for j in range(NU):
        h = eps * max(1.0, abs(u[j]))
        up = u.copy()
        um = u.copy()
        up[j] += h
        um[j] -= h
        B[:, j] = (rk4(x, up, dt, params) - rk4(x, um, dt, params)) / (2.0 * h)
    return A, B


@njit
def rollout(x0, us, dt, params):
    n = us.shape[0]
    xs = np.empty((n + 1, NX))
    xs[0] = x0
    for k in range(n):
        xs[k + 1] = rk4(xs[k], us[k], dt, params)
    return xs


@njit
def linearize_trajectory(xs, us, dt, params, eps):
    n = us.shape[0]
    As = np.empty((n, NX, NX))
    Bs = np.empty((n, NX, NU))
    for k in range(n):
        A, B = rk4_jacobians(xs[k], us[k], dt, params, eps)
        As[k] = A
        Bs[k] = B
    return As, Bs


@njit
def feedback_rollout(x0, xs_nom, us_nom, K, kff, alpha, dt, params, u_min):
    """Roll out ``u = u_nom + alpha*kff + K (x - x_nom)``; controls clipped below at ``u_min``."""
    n = us_nom.shape[0]
    xs = np.empty((n + 1, NX))
    us = np.empty((n, NU))
    xs[0] = x0
    for k in range(n):
        u = us_nom[k] + alpha * kff[k] + K[k] @ (xs[k] - xs_nom[k])
        for j in range(NU):
            if u[j] < u_min:
                u[j] = u_min
        us[k] = u
        xs[k + 1] = rk4(xs[k], u, dt, params)
    return xs, us


@njit
def nearest_index(nodes, count, q):
    best = -1
    best_d2 = np.inf
    for i in range(count):
        d0 = nodes[i, 0] - q[0]
        d1 = nodes[i, 1] - q[1]
        d2 = nodes[i, 2] - q[2]
        d = d0 * d0 + d1 * d1 + d2 * d2
        if d < best_d2:
            best_d2 = d
            best = i
    return best


@njit
def near_indices(nodes, count, q, radius):
    r2 = radius * radius
    hits = np.empty(count, dtype=np.int64)
    n = 0
    for i in range(count):
        d0 = nodes[i, 0] - q[0]
        d1 = nodes[i, 1] - q[1]
        d2 = nodes[i, 2] - q[2]
        if d0 * d0 + d1 * d1 + d2 * d2 <= r2:
            hits[n] = i
            n += 1
    return hits[:n]
