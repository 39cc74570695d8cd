"""Quadrotor rigid-body model: 12-state [p v r w], four rotor thrusts.

``r`` is a rotation vector (axis * angle) giving body-to-world attitude and
``w`` is the body-frame angular velocity. Total thrust acts along the body
z axis; the arm moments follow a plus configuration with rotors 1..4.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .kernels import NU, NX

DEFAULT_FD_EPS = 6e-6


@dataclass(frozen=True)
class VehicleParams:
    m: float = 0.5
    J: tuple = (3.2e-3, 3.2e-3, 5.5e-3)
    rho: float = 0.17
    k_v: float = 0.25
    k_m: float = 0.025
    g: float = 9.81
    clamp_thrust: bool = False

    def __post_init__(self):
        J = self.inertia
        if self.m <= 0 or self.rho <= 0 or self.g <= 0:
            raise ValueError("m, rho and g must be positive")
        if not np.allclose(J, J.T) or np.any(np.linalg.eigvalsh(J) <= 0):
            raise ValueError("J must be symmetric positive definite")

    @property
    def inertia(self) -> np.ndarray:
        J = np.asarray(self.J, dtype=float)
        return np.diag(J) if J.ndim == 1 else J.reshape(3, 3)

    @cached_property
    def _packed(self) -> np.ndarray:
        J = self.inertia
        return np.concatenate(
            [[self.m, self.rho, self.k_v, self.k_m, self.g], J.ravel(), np.linalg.inv(J).ravel()]
        ).astype(np.float64)

    def as_array(self) -> np.ndarray:
        return self._packed

    @property
    def hover_thrust(self) -> float:
        return self.m * self.g / 4.0

    @property
    def u_min(self) -> float:
        return 0.0 if self.clamp_thrust else -np.inf


@dataclass(frozen=True)
class LinearizedDynamics:
    A: np.ndarray
    B: np.ndarray
    x_bar: np.ndarray
    u_bar: np.ndarray
    dt: float
    next_state: np.ndarray = field(repr=False)

    def predict(self, x, u):
        """First-order prediction of the RK4 step at ``(x, u)``."""
        return self.next_state + self.A @ (np.asarray(x) - self.x_bar) + self.B @ (np.asarray(u) - self.u_bar)


def make_state(p=(0, 0, 0), v=(0, 0, 0), r=(0, 0, 0), w=(0, 0, 0)) -> np.ndarray:
    return np.concatenate([p, v, r, w]).astype(float)


def hover_control(params: VehicleParams) -> np.ndarray:
    return np.full(NU, params.hover_thrust)


def rotation_matrix(r) -> np.ndarray:
    return kernels.rotvec_to_matrix(np.asarray(r, dtype=float))


def _check(x, u):
    x = np.ascontiguousarray(x, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if x.shape != (NX,) or u.shape != (NU,):
        raise ValueError(f"expected state ({NX},) and control ({NU},), got {x.shape} and {u.shape}")
    return x, u


def f_continuous(x, u, params: VehicleParams) -> np.ndarray:
    x, u = _check(x, u)
    return kernels.dynamics_rhs(x, u, params.as_array())


def rk4_step(x, u, dt: float, params: VehicleParams) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, u = _check(x, u)
    return kernels.rk4(x, u, float(dt), params.as_array())


def rollout(x0, us, dt: float, params: VehicleParams) -> np.ndarray:
    us = np.ascontiguousarray(us, dtype=float).reshape(-1, NU)
    return kernels.rollout(np.ascontiguousarray(x0, dtype=float), us, float(dt), params.as_array())


def linearize(x_bar, u_bar, dt: float, params: VehicleParams, eps: float = DEFAULT_FD_EPS) -> LinearizedDynamics:
    """Discrete-time Jacobians of the RK4 step by central differences."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x_bar, u_bar = _check(x_bar, u_bar)
    p = params.as_array()
    A, B = kernels.rk4_jacobians(x_bar, u_bar, float(dt), p, float(eps))
    return LinearizedDynamics(A, B, x_bar, u_bar, float(dt), kernels.rk4(x_bar, u_bar, float(dt), p))
