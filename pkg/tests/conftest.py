import numpy as np
import pytest

from ommfc.dynamics import rollout
from ommfc.measure import make_ensemble
from ommfc.scenario import CostSpec, DynamicsSpec, Obstacle, TimeGrid

SI2 = DynamicsSpec(kind="single_integrator", dim=2)
KEP = DynamicsSpec(kind="keplerian", grav_param=398600.0, control_bound=1e-3)


def si_cost(**kw):
    base = dict(control_weight=0.1, control_form="half", terminal_kind="quadratic",
                terminal_weight=30.0, target=(5.0, 3.0),
                obstacles=(Obstacle((2.5, 1.5), 0.8, 0.2, 1e3),),
                interaction_weight=0.5, kernel_width=0.25)
    base.update(kw)
    return CostSpec(**base)


def random_ensemble(rng, grid, M, spec=SI2, scale=1.0):
    xs = rng.standard_normal((M, spec.state_dim))
    U = scale * rng.standard_normal((M, grid.N_t, spec.control_dim))
    states = [rollout(spec, grid, xs[m], U[m]) for m in range(M)]
    return make_ensemble(spec, grid, states, U, rng.dirichlet(np.ones(M)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid():
    return TimeGrid(T=1.0, N_t=8)
