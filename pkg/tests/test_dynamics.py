import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import KEP, SI2
from ommfc.dynamics import (
    DynamicsError,
    circular_orbit_state,
    drift,
    drift_jacobians,
    project_control,
    rollout,
    specific_energy,
)
from ommfc.scenario import DynamicsSpec, TimeGrid


def test_single_integrator_drift():
    assert np.array_equal(drift(SI2, [1.0, 2.0], [3.0, -1.0]), [3.0, -1.0])


def test_keplerian_drift():
    x = [7000.0, 0, 0, 0, 7.546, 0]
    f = drift(KEP, x, [0.0, 0.0, 0.0])
    assert np.allclose(f[:3], [0, 7.546, 0])
    assert f[3] == pytest.approx(-398600 / 7000**2, rel=1e-14)
    assert f[3] == pytest.approx(-8.1347e-3, abs=1e-7)
    assert f[4] == f[5] == 0.0


def test_keplerian_singularity():
    with pytest.raises(DynamicsError):
        drift(KEP, np.zeros(6), np.zeros(3))


def _fd_jac(fun, z, h=1e-6):
    z = np.asarray(z, float)
    cols = []
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        cols.append((fun(z + e) - fun(z - e)) / (2 * h))
    return np.stack(cols, axis=1)


def test_single_integrator_jacobians():
    A, B = drift_jacobians(SI2, [1.0, 2.0], [0.3, 0.1])
    assert np.array_equal(A, np.zeros((2, 2))) and np.array_equal(B, np.eye(2))


@pytest.mark.parametrize("spec,x,u", [
    (SI2, [0.3, -1.2], [0.5, 2.0]),
    (KEP, [7000.0, 120.0, -40.0, 0.01, 7.5, 0.02], [1e-4, -3e-4, 2e-4]),
    (KEP, [-3000.0, 6200.0, 900.0, -6.0, -3.1, 0.5], [0.0, 0.0, 0.0]),
])
def test_jacobians_match_fd(spec, x, u):
    A, B = drift_jacobians(spec, x, u)
    x, u = np.asarray(x), np.asarray(u)
    Ax = _fd_jac(lambda z: drift(spec, z, u), x)
    Bu = _fd_jac(lambda w: drift(spec, x, w), u)
    assert np.linalg.norm(A - Ax) <= 1e-5 * max(np.linalg.norm(A), 1e-12)
    assert np.linalg.norm(B - Bu) <= 1e-5 * np.linalg.norm(B)


def test_keplerian_control_jacobian_is_identity_block():
    _, B = drift_jacobians(KEP, [7000.0, 0, 0, 0, 7.5, 0], np.zeros(3))
    assert np.array_equal(B[3:], np.eye(3)) and np.array_equal(B[:3], np.zeros((3, 3)))


def test_constant_control_is_exact():
    X = rollout(SI2, TimeGrid(1.0, 10), [0.0, 0.0], np.tile([1.0, 0.0], (10, 1)))
    assert np.array_equal(X[-1], [1.0, 0.0])


def test_zero_control_is_stationary():
    X = rollout(SI2, TimeGrid(2.0, 7), [0.4, -0.2], np.zeros((7, 2)))
    assert np.array_equal(X, np.tile([0.4, -0.2], (8, 1)))


def test_rollout_keeps_initial_state():
    xi = np.array([0.1, 0.7])
    X = rollout(SI2, TimeGrid(1.0, 5), xi, np.ones((5, 2)))
    assert np.array_equal(X[0], xi) and X.shape == (6, 2)


def test_rollout_shape_mismatch():
    with pytest.raises(ValueError):
        rollout(SI2, TimeGrid(1.0, 5), [0.0, 0.0], np.zeros((4, 2)))


def test_circular_orbit_holds_radius():
    xi = circular_orbit_state(KEP, 7000.0)
    assert xi[4] == pytest.approx(math.sqrt(398600.0 / 7000.0), rel=1e-15)
    assert xi[4] == pytest.approx(7.54605, abs=1e-5)
    X = rollout(KEP, TimeGrid(6000.0, 150), xi, np.zeros((150, 3)))
    r = np.linalg.norm(X[:, :3], axis=1)
    assert np.max(np.abs(r - 7000.0)) < 1.0
    E = specific_energy(KEP, X)
    assert np.max(np.abs(E - E[0])) / abs(E[0]) < 1e-6


def test_projection_examples():
    assert np.allclose(project_control(KEP, [2e-3, 0, 0]), [1e-3, 0, 0], rtol=0, atol=1e-18)
    u = np.array([5e-4, 0, 0])
    assert np.array_equal(project_control(KEP, u), u)
    v = np.array([40.0, -7.0])
    assert np.array_equal(project_control(SI2, v), v)


vec3 = arrays(np.float64, 3, elements=st.floats(-1e-2, 1e-2, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(vec3)
def test_projection_feasible_and_idempotent(u):
    p = project_control(KEP, u)
    assert np.linalg.norm(p) <= KEP.control_bound
    assert np.array_equal(project_control(KEP, p), p)
    # direction preserved
    n = np.linalg.norm(u)
    if n > 0:
        assert np.allclose(p / np.linalg.norm(p), u / n, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 3), elements=st.floats(-5e-3, 5e-3)))
def test_projection_on_stacks(U):
    P = project_control(KEP, U)
    assert np.all(np.linalg.norm(P, axis=1) <= KEP.control_bound)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), arrays(np.float64, 2, elements=st.floats(-5, 5)))
def test_si_rollout_is_cumulative_sum(N, xi):
    rng = np.random.default_rng(N)
    U = rng.standard_normal((N, 2))
    grid = TimeGrid(1.5, N)
    X = rollout(SI2, grid, xi, U)
    ref = xi + grid.dt * np.vstack([np.zeros(2), np.cumsum(U, axis=0)])
    assert np.allclose(X, ref, atol=1e-12)


def test_3d_single_integrator():
    spec = DynamicsSpec(kind="single_integrator", dim=3)
    X = rollout(spec, TimeGrid(1.0, 4), np.zeros(3), np.ones((4, 3)))
    assert np.allclose(X[-1], [1, 1, 1])


def test_thrust_raises_energy():
    xi = circular_orbit_state(KEP, 7000.0)
    X0 = rollout(KEP, TimeGrid(600.0, 20), xi, np.zeros((20, 3)))
    # prograde thrust along velocity direction
    U = np.array([1e-3 * X0[n, 3:] / np.linalg.norm(X0[n, 3:]) for n in range(20)])
    X = rollout(KEP, TimeGrid(600.0, 20), xi, U)
    assert specific_energy(KEP, X[-1]) > specific_energy(KEP, X0[-1])
    assert math.isfinite(float(np.sum(X)))
