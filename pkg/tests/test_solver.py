import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ommfc.linearized_ocp import FrozenField, solve_lmo_ensemble
from ommfc.measure import GramSystem, Mixture, build_gram, objective
from ommfc.oracles import dense_lq
from ommfc.scenario import (CostSpec, DynamicsSpec, InitialDistribution, ScenarioConfig,
                            SolverOptions, TimeGrid, load_scenario)
from ommfc.solver import (
    SolverError,
    fcfw_run,
    fcfw_weight_qp,
    fw_run,
    fw_step_size,
    initial_ensemble,
    config_sources,
    run,
    simplex_project,
    surrogate_gap,
)


def small(name="uav2d_single", N_t=20, K=6, **solver):
    cfg = load_scenario(name)
    from dataclasses import replace
    cfg = replace(cfg, grid=TimeGrid(cfg.grid.T, N_t))
    return cfg.with_solver(outer_iterations=K, **{"lmo_steps": 60, **solver})


def lq_config(K=50, steps=2000, algorithm="fw"):
    """lambda = 0, single integrator, 5 steps, one source."""
    cost = CostSpec(control_weight=0.4, control_form="half", terminal_kind="quadratic",
                    terminal_weight=6.0, target=(1.0, -0.5))
    return ScenarioConfig(
        name="lq", dynamics=DynamicsSpec("single_integrator", 2), grid=TimeGrid(1.0, 5), cost=cost,
        initial=InitialDistribution("point_mass", states=((-0.4, 0.8),), weights=(1.0,)),
        solver=SolverOptions(algorithm=algorithm, outer_iterations=K, lmo_steps=steps,
                             lmo_learning_rate=0.05))


# --- scalar pieces ---------------------------------------------------------


def test_step_sizes():
    assert fw_step_size(0) == 1.0
    assert fw_step_size(1) == pytest.approx(2 / 3, rel=1e-16)
    assert fw_step_size(98) == pytest.approx(0.02, rel=1e-15)


def _water_fill(v):
    lo, hi = np.min(v) - 1.0, np.max(v)
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        if np.maximum(v - tau, 0).sum() > 1:
            lo = tau
        else:
            hi = tau
    return np.maximum(v - 0.5 * (lo + hi), 0)


def test_simplex_examples():
    assert np.allclose(simplex_project([0.5, 0.7]), [0.4, 0.6], rtol=0, atol=1e-15)
    w = np.array([0.2, 0.3, 0.5])
    assert np.max(np.abs(simplex_project(w) - w)) <= 1e-15
    assert np.array_equal(simplex_project([10.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-5, 5)))
def test_simplex_matches_water_filling(v):
    p = simplex_project(v)
    assert abs(p.sum() - 1) <= 1e-12 and np.all(p >= 0)
    assert np.allclose(p, _water_fill(v), atol=1e-9)


def _grid_search(H, c, res):
    best = np.inf
    k = c.size
    ticks = np.arange(0, res + 1)
    for idx in itertools.product(ticks, repeat=k - 1):
        if sum(idx) > res:
            continue
        a = np.array(list(idx) + [res - sum(idx)]) / res
        best = min(best, 0.5 * a @ H @ a + c @ a)
    return best


def test_qp_single_atom():
    g = GramSystem(np.array([[2.0]]), np.array([1.0]))
    assert np.array_equal(fcfw_weight_qp(g, np.ones(1), SolverOptions()), [1.0])


def test_qp_identity_prefers_cheap_atom():
    g = GramSystem(np.eye(2), np.array([0.0, 1.0]))
    a = fcfw_weight_qp(g, np.array([0.5, 0.5]), SolverOptions())
    assert a[0] >= 0.99
    ref = min(0.5 * x * x + 0.5 * (1 - x) ** 2 + (1 - x) for x in np.linspace(0, 1, 10001))
    assert 0.5 * a @ a + a[1] <= ref + 1e-12


def test_qp_random_psd_vs_grid_search():
    rng = np.random.default_rng(4)
    for _ in range(5):
        A = rng.standard_normal((3, 3))
        H = A @ A.T
        c = rng.standard_normal(3)
        a = fcfw_weight_qp(GramSystem(H, c), np.array([1.0, 0, 0]), SolverOptions())
        ref = _grid_search(H, c, 300)
        assert 0.5 * a @ H @ a + c @ a <= ref + 1e-4


def test_qp_shape_mismatch():
    with pytest.raises(ValueError):
        fcfw_weight_qp(GramSystem(np.eye(2), np.zeros(2)), np.ones(3) / 3, SolverOptions())


def test_surrogate_gap_self_is_zero():
    cfg = small()
    src = config_sources(cfg)
    a0 = initial_ensemble(cfg, src)
    g = build_gram([a0, a0], cfg.cost)
    assert abs(surrogate_gap(g, np.ones(1))) <= 1e-10


# --- runs ------------------------------------------------------------------


def test_fw_k1_is_first_lmo_ensemble():
    cfg = small(K=1)
    r = fw_run(cfg)
    src = config_sources(cfg)
    a0 = initial_ensemble(cfg, src)
    field = FrozenField.from_mixture(Mixture((a0,), np.ones(1)), cfg.cost, 2)
    ens, _ = solve_lmo_ensemble(src, field, cfg.cost, cfg.dynamics, cfg.grid, cfg.solver)
    assert len(r.mixture.atoms) == 1 and np.array_equal(r.mixture.weights, [1.0])
    assert np.array_equal(r.mixture.atoms[0].states, ens.states)
    assert len(r.records) == 2


def test_fcfw_k1_against_fw_k1():
    cfg = small(K=1)
    a, b = fw_run(cfg), fcfw_run(cfg)
    assert np.array_equal(a.mixture.atoms[0].states, b.mixture.atoms[1].states)
    assert b.records[-1].objective <= a.records[-1].objective + 1e-12
    # here the initial hover atom is far worse, so the QP drops it entirely
    assert np.array_equal(b.mixture.weights, [0.0, 1.0])
    assert b.records[-1].objective == a.records[-1].objective


@pytest.mark.parametrize("name", ["uav2d_single", "uav2d_multisource"])
def test_fcfw_monotone_and_not_worse_than_fw(name):
    cfg = small(name, K=8)
    fc, fw = fcfw_run(cfg), fw_run(cfg)
    J = fc.objectives
    assert len(J) == 9
    assert np.all(J[1:] <= J[:-1] + 1e-9 * (1 + np.abs(J[:-1])))
    assert J[-1] <= fw.objectives[-1] + 1e-6 * (1 + abs(fw.objectives[-1]))


def test_records_and_gaps():
    r = fcfw_run(small(K=4))
    assert [x.k for x in r.records] == list(range(5))
    assert r.records[-1].gap_displayed == 0.0
    assert np.isnan(r.records[-1].gap_surrogate)
    assert all(np.isfinite(x.gap_surrogate) for x in r.records[:-1])
    assert r.records[2].gap_displayed == r.records[2].objective - r.records[-1].objective


def test_objective_matches_gram():
    r = fcfw_run(small(K=4))
    assert objective(r.mixture, build_gram(list(r.mixture.atoms), r.config.cost)) == \
        pytest.approx(r.records[-1].objective, rel=1e-12)


def test_deterministic():
    cfg = small("uav2d_multisource", K=3, lmo_restarts=1)
    a, b = run(cfg), run(cfg)
    assert np.array_equal(a.objectives, b.objectives)
    assert np.array_equal(a.mixture.weights, b.mixture.weights)
    for x, y in zip(a.mixture.atoms, b.mixture.atoms):
        assert np.array_equal(x.states, y.states)


def test_threads_do_not_change_result():
    cfg = small("uav2d_multisource", K=3, lmo_restarts=1)
    a, b = run(cfg, threads=1), run(cfg, threads=3)
    assert np.array_equal(a.objectives, b.objectives)
    assert np.array_equal(a.surrogate_gaps[:-1], b.surrogate_gaps[:-1])


def test_fw_prunes_initial_atom():
    r = fw_run(small(K=3))
    assert len(r.mixture.atoms) == 3 and r.gram.k == 3
    assert abs(r.mixture.weights.sum() - 1) <= 1e-12


def test_gap_tol_stops_early():
    r = fcfw_run(small(K=30, gap_tol=1e3))
    assert len(r.records) == 2


def test_lq_oracle_fw():
    cfg = lq_config()
    r = fw_run(cfg)
    *_, J_opt = dense_lq([-0.4, 0.8], (1.0, -0.5), 0.4, 6.0, 1.0, 5)
    J = r.objectives
    assert J[-1] <= J_opt * 1.05 and J[-1] >= J_opt - 1e-9
    gaps = r.surrogate_gaps[:-1]
    assert np.all(gaps >= -1e-6 * (1 + np.abs(J[:-1])))
    assert np.all(J[:-1] - J_opt <= gaps + 1e-6 * (1 + np.abs(J[:-1])))


def test_initial_rollout_failure_is_solver_error():
    cfg = ScenarioConfig(
        name="bad", dynamics=DynamicsSpec("keplerian", control_bound=1e-3), grid=TimeGrid(10.0, 3),
        cost=CostSpec(control_weight=1.0, control_form="full", terminal_kind="radius",
                      terminal_weight=1.0, target_radius=8000.0),
        initial=InitialDistribution("point_mass", states=((1e-200, 0, 0, 0, 0, 0),), weights=(1.0,)),
        solver=SolverOptions(outer_iterations=2, lmo_steps=2))
    with pytest.raises(SolverError) as e:
        fcfw_run(cfg)
    assert e.value.iteration == 0 and e.value.records == []


def test_lmo_failure_keeps_history(monkeypatch):
    from ommfc import solver
    from ommfc.linearized_ocp import LMOError

    real = solver.solve_lmo_ensemble

    def flaky(*args, iteration=0, **kw):
        if iteration == 2:
            raise LMOError("boom", iteration=5, member=0)
        return real(*args, iteration=iteration, **kw)

    monkeypatch.setattr(solver, "solve_lmo_ensemble", flaky)
    with pytest.raises(SolverError) as e:
        fcfw_run(small(K=4))
    assert e.value.iteration == 2
    assert [r.k for r in e.value.records] == [0, 1, 2]
