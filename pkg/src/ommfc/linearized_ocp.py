"""The linear minimization oracle: one classical optimal-control problem per source state.

Each subproblem minimizes the linearized running cost

    g(t_n, x, u) = l0(t_n, x, u) + 2 lambda sum_i beta_i sum_m pi_m W(|x - x_i(t_n, m)|)

plus the terminal cost, over zero-order-hold controls, using exact discrete
adjoint gradients and projected Adam.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .dynamics import DynamicsError, project_control
from .measure import Mixture, TrajectoryEnsemble, active_field, control_cost, kernel, obstacle_potential
from .scenario import CostSpec, DynamicsSpec, SolverOptions, TimeGrid


class LMOError(RuntimeError):
    def __init__(self, message: str, *, iteration: int | None = None, member: int | None = None):
        self.iteration = iteration
        self.member = member
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class FrozenField:
    """Read-only view of the current iterate as seen by the oracle.

    ``mixture`` may be None, meaning no population (the interaction term vanishes).
    """

    mixture: Mixture | None
    interaction_weight: float
    kernel_width: float
    pos_dim: int

    @classmethod
    def from_mixture(cls, mix: Mixture | None, cost: CostSpec, pos_dim: int) -> "FrozenField":
        return cls(mix, cost.interaction_weight, cost.kernel_width, pos_dim)

    @cached_property
    def cloud(self) -> tuple[np.ndarray, np.ndarray]:
        if self.mixture is None or self.interaction_weight == 0.0:
            return np.zeros((1, 0, self.pos_dim)), np.zeros(0)
        return active_field(self.mixture)


def linearized_running_cost(field: FrozenField, n: int, x, u, cost: CostSpec) -> float:
    """g at time index n for position x and control u (plain numpy evaluation)."""
    x = np.asarray(x, dtype=float)
    if field.mixture is not None:
        N_t = field.mixture.atoms[0].grid.N_t
        if not 0 <= n < N_t:
            raise IndexError(f"time index {n} outside [0, {N_t})")
    val = float(control_cost(cost, u)) + float(obstacle_potential(cost, x))
    Y, w = field.cloud
    if w.size:
        r = np.linalg.norm(Y[n] - x, axis=-1)
        val += 2.0 * field.interaction_weight * float(w @ kernel(cost, r))
    return val


class _Problem:
    """Flattened kernel arguments for one (field, cost, dynamics, grid)."""

    def __init__(self, field: FrozenField, cost: CostSpec, spec: DynamicsSpec, grid: TimeGrid):
        d = spec.pos_dim
        self.spec, self.grid = spec, grid
        obs = cost.obstacles
        self.obs_c = np.array([o.center for o in obs], dtype=float).reshape(len(obs), d)
        self.obs_r = np.array([o.effective_radius for o in obs], dtype=float)
        self.obs_g = np.array([o.gain for o in obs], dtype=float)
        self.term_kind = 0 if cost.terminal_kind == "quadratic" else 1
        target = cost.target if cost.target is not None else (0.0,) * d
        self.target = np.array(target, dtype=float)
        self.radius = float(cost.target_radius or 0.0)
        self.term_coef = cost.terminal_coef if (cost.terminal_kind == "radius" or cost.target is not None) else 0.0
        self.ctrl_coef = cost.control_coef
        Y, w = field.cloud
        if w.size and Y.shape[0] != grid.N_t:
            raise ValueError("frozen field lives on a different time grid")
        self.Y, self.w = Y, w
        self.lam2 = 2.0 * cost.interaction_weight if w.size else 0.0
        self.inv2s2 = 1.0 / (2.0 * cost.kernel_width**2)

    def evaluate(self, xi, U, want_grad: bool = True):
        spec, grid = self.spec, self.grid
        U = np.ascontiguousarray(U, dtype=float)
        X = np.empty((grid.N_t + 1, spec.state_dim))
        G = np.zeros_like(U)
        val = _kernels.lmo_value_grad(
            spec.code, spec.grav_param, np.ascontiguousarray(xi, dtype=float), U, grid.dt,
            spec.pos_dim, self.ctrl_coef, self.obs_c, self.obs_r, self.obs_g,
            self.term_kind, self.term_coef, self.target, self.radius,
            self.lam2, self.inv2s2, self.Y, self.w, X, G, want_grad,
        )
        return val, G, X


def _check_inputs(controls, xi, spec, grid):
    U = np.asarray(controls, dtype=float)
    if U.shape != (grid.N_t, spec.control_dim):
        raise ValueError(f"controls must have shape {(grid.N_t, spec.control_dim)}")
    if np.asarray(xi).shape != (spec.state_dim,):
        raise ValueError(f"initial state must have length {spec.state_dim}")
    if spec.kind == "keplerian" and not np.any(np.asarray(xi)[:3]):
        raise DynamicsError("Keplerian drift is singular at r = 0")
    return U


def lmo_cost(controls, xi, field: FrozenField, cost: CostSpec, spec: DynamicsSpec, grid: TimeGrid) -> float:
    U = _check_inputs(controls, xi, spec, grid)
    val, _, _ = _Problem(field, cost, spec, grid).evaluate(xi, U, want_grad=False)
    if not np.isfinite(val):
        raise DynamicsError("rollout left the finite range")
    return float(val)


def lmo_gradient(controls, xi, field: FrozenField, cost: CostSpec, spec: DynamicsSpec,
                 grid: TimeGrid) -> np.ndarray:
    """Exact gradient of the discrete :func:`lmo_cost` w.r.t. every control vector."""
    U = _check_inputs(controls, xi, spec, grid)
    val, G, _ = _Problem(field, cost, spec, grid).evaluate(xi, U)
    if not np.isfinite(val):
        raise DynamicsError("rollout left the finite range")
    return G


@dataclass(frozen=True)
class LMOSolution:
    states: np.ndarray
    controls: np.ndarray
    cost: float


def _adam(problem: _Problem, xi, U0, opts: SolverOptions) -> LMOSolution:
    spec = problem.spec
    b1, b2, eps = opts.adam_beta1, opts.adam_beta2, opts.adam_epsilon
    lr0, lr1 = opts.lmo_learning_rate, opts.lmo_learning_rate_final
    U = project_control(spec, U0)
    m = np.zeros_like(U)
    v = np.zeros_like(U)
    best = None
    for t in range(opts.lmo_steps + 1):
        last = t == opts.lmo_steps
        val, G, X = problem.evaluate(xi, U, want_grad=not last)
        if not np.isfinite(val):
            raise LMOError(f"non-finite LMO cost at Adam iteration {t}", iteration=t)
        if best is None or val < best.cost:
            best = LMOSolution(X, U.copy(), float(val))
        if last:
            break
        # geometric decay from lr0 to lr1 when a final rate is set
        lr = lr0 if lr1 is None else lr0 * (lr1 / lr0) ** (t / max(opts.lmo_steps - 1, 1))
        m = b1 * m + (1.0 - b1) * G
        v = b2 * v + (1.0 - b2) * (G * G)
        mhat = m / (1.0 - b1 ** (t + 1))
        vhat = v / (1.0 - b2 ** (t + 1))
        U = project_control(spec, U - lr * mhat / (np.sqrt(vhat) + eps))
    return best


def restart_perturbation(rng: np.random.Generator, n_steps: int, dim: int, scale: float) -> np.ndarray:
    """Smooth random control offset: three sine modes over the horizon with 1/j amplitudes."""
    s = (np.arange(n_steps) + 0.5) / n_steps
    modes = np.stack([np.sin(j * np.pi * s) / j for j in (1, 2, 3)], axis=1)
    return scale * modes @ rng.standard_normal((3, dim))


def _solve_member(problem: _Problem, xi, U0, opts: SolverOptions, seed) -> LMOSolution:
    """Adam from U0, plus ``opts.lmo_restarts`` seeded restarts from perturbed copies of U0.

    The unperturbed start is tried first and wins ties, so the result is never
    worse than U0.
    """
    best = _adam(problem, xi, U0, opts)
    if opts.lmo_restarts:
        rng = np.random.default_rng(seed)
        scale = opts.lmo_restart_scale
        for _ in range(opts.lmo_restarts):
            dU = restart_perturbation(rng, U0.shape[0], U0.shape[1], scale)
            sol = _adam(problem, xi, U0 + dU, opts)
            if sol.cost < best.cost:
                best = sol
    return best


def solve_lmo(xi, field: FrozenField, cost: CostSpec, spec: DynamicsSpec, grid: TimeGrid,
              opts: SolverOptions, warm_start=None) -> tuple[np.ndarray, np.ndarray, float]:
    """Projected Adam from ``warm_start`` (zeros by default), plus any seeded restarts.

    Returns ``(states, controls, cost)`` for the best iterate seen, which is
    never worse than the starting controls.
    """
    U0 = np.zeros((grid.N_t, spec.control_dim)) if warm_start is None else warm_start
    _check_inputs(U0, xi, spec, grid)
    sol = _solve_member(_Problem(field, cost, spec, grid), np.asarray(xi, dtype=float),
                        np.asarray(U0, dtype=float), opts, [opts.rng_seed, 0, 0])
    return sol.states, sol.controls, sol.cost


def solve_lmo_ensemble(sources, field: FrozenField, cost: CostSpec, spec: DynamicsSpec, grid: TimeGrid,
                       opts: SolverOptions, warm_starts=None, threads: int | None = 1,
                       iteration: int = 0) -> tuple[TrajectoryEnsemble, np.ndarray]:
    """Solve one LMO per source state and aggregate them into an ensemble.

    ``sources`` is a list of ``(xi, pi)``. Members are independent and each
    restart stream is seeded from ``(opts.rng_seed, iteration, member)``, so
    the result does not depend on ``threads``. Returns the ensemble and the
    per-member LMO costs.
    """
    if not sources:
        raise ValueError("at least one source state is required")
    problem = _Problem(field, cost, spec, grid)

    def solve(m: int) -> LMOSolution:
        xi = np.asarray(sources[m][0], dtype=float)
        U0 = np.zeros((grid.N_t, spec.control_dim)) if warm_starts is None else warm_starts[m]
        try:
            return _solve_member(problem, xi, np.asarray(U0, dtype=float), opts,
                                 [opts.rng_seed, iteration, m])
        except (LMOError, DynamicsError) as exc:
            raise LMOError(f"LMO failed for source {m}: {exc}", member=m,
                           iteration=getattr(exc, "iteration", None)) from exc

    idx = range(len(sources))
    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sols = list(pool.map(solve, idx))
    else:
        sols = [solve(m) for m in idx]
    ens = TrajectoryEnsemble(
        states=np.stack([s.states for s in sols]),
        controls=np.stack([s.controls for s in sols]),
        weights=np.array([w for _, w in sources], dtype=float),
        grid=grid,
        pos_dim=spec.pos_dim,
    )
    return ens, np.array([s.cost for s in sols])
