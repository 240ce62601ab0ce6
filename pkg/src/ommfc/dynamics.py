"""Controlled dynamics: drift fields, Jacobians, RK4 rollout and control projection."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .scenario import DynamicsSpec, TimeGrid


class DynamicsError(RuntimeError):
    pass


class IntegrationError(DynamicsError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite state produced at step {step}")


def _check(spec: DynamicsSpec, x, u) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(x, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if x.shape != (spec.state_dim,) or u.shape != (spec.control_dim,):
        raise ValueError(f"expected state {spec.state_dim} / control {spec.control_dim}, "
                         f"got {x.shape} / {u.shape}")
    if spec.kind == "keplerian" and not np.any(x[:3]):
        raise DynamicsError("Keplerian drift is singular at r = 0")
    return x, u


def drift(spec: DynamicsSpec, x, u) -> np.ndarray:
    """Single integrator: ``u``. Keplerian: ``(v, -mu r/|r|^3 + a)``."""
    x, u = _check(spec, x, u)
    out = np.empty(spec.state_dim)
    _kernels.drift_into(spec.code, spec.grav_param, x, u, out)
    return out


def drift_jacobians(spec: DynamicsSpec, x, u) -> tuple[np.ndarray, np.ndarray]:
    x, u = _check(spec, x, u)
    if spec.kind == "single_integrator":
        return np.zeros((spec.dim, spec.dim)), np.eye(spec.dim)
    r = x[:3]
    rn = np.linalg.norm(r)
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    A[3:, :3] = -spec.grav_param * (np.eye(3) / rn**3 - 3.0 * np.outer(r, r) / rn**5)
    B = np.zeros((6, 3))
    B[3:, :] = np.eye(3)
    return A, B


def rollout(spec: DynamicsSpec, grid: TimeGrid, xi, controls) -> np.ndarray:
    """Integrate with classical RK4, holding each control constant over its step.

    Returns the (N_t + 1, state_dim) state array; row 0 is ``xi``.
    """
    xi = np.ascontiguousarray(xi, dtype=float)
    U = np.ascontiguousarray(controls, dtype=float)
    if U.shape != (grid.N_t, spec.control_dim):
        raise ValueError(f"controls must have shape {(grid.N_t, spec.control_dim)}, got {U.shape}")
    if xi.shape != (spec.state_dim,):
        raise ValueError(f"initial state must have length {spec.state_dim}")
    if spec.kind == "keplerian" and not np.any(xi[:3]):
        raise DynamicsError("Keplerian drift is singular at r = 0")
    X = np.empty((grid.N_t + 1, spec.state_dim))
    bad = _kernels.rollout_into(spec.code, spec.grav_param, xi, U, grid.dt, X)
    if bad >= 0:
        raise IntegrationError(bad)
    return X


def project_control(spec: DynamicsSpec, u) -> np.ndarray:
    """Radial projection onto the thrust ball. Accepts one control or a stack of them."""
    u = np.array(u, dtype=float)
    if spec.kind != "keplerian" or spec.control_bound is None:
        return u
    a_max = spec.control_bound
    norms = np.linalg.norm(u, axis=-1, keepdims=True)
    # aim a few ulps inside the ball so that any way of computing the norm
    # afterwards (dot, hypot, sum of squares) still sees |u| <= a_max
    inner = a_max * (1.0 - 4.0 * np.finfo(float).eps)
    scale = np.where(norms > a_max, inner / np.where(norms > 0, norms, 1.0), 1.0)
    return u * scale


def specific_energy(spec: DynamicsSpec, states) -> np.ndarray:
    X = np.asarray(states, dtype=float)
    r = np.linalg.norm(X[..., :3], axis=-1)
    v2 = np.sum(X[..., 3:] ** 2, axis=-1)
    return 0.5 * v2 - spec.grav_param / r


def circular_orbit_state(spec: DynamicsSpec, radius: float) -> np.ndarray:
    """State at (radius, 0, 0) moving prograde in the x-y plane at circular speed."""
    return np.array([radius, 0.0, 0.0, 0.0, np.sqrt(spec.grav_param / radius), 0.0])
