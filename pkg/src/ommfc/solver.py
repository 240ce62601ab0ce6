"""Frank-Wolfe and fully-corrective Frank-Wolfe outer loops over trajectory mixtures."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import DynamicsError, rollout
from .linearized_ocp import FrozenField, LMOError, solve_lmo_ensemble
from .measure import (
    GramSystem,
    Mixture,
    TrajectoryEnsemble,
    combine_weights,
    extend_gram,
    qp_value,
)
from .scenario import ScenarioConfig, SolverOptions, sample_initial_states

log = logging.getLogger(__name__)


@dataclass
class IterationRecord:
    k: int
    objective: float
    gap_displayed: float = float("nan")
    gap_surrogate: float = float("nan")
    lmo_seconds: float = 0.0


@dataclass
class RunResult:
    records: list[IterationRecord]
    mixture: Mixture
    gram: GramSystem
    config: ScenarioConfig
    sources: list = field(default_factory=list)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def surrogate_gaps(self) -> np.ndarray:
        return np.array([r.gap_surrogate for r in self.records])


class SolverError(RuntimeError):
    """Outer-loop failure; ``records`` holds the history up to the failing iteration."""

    def __init__(self, message: str, iteration: int, records: list[IterationRecord]):
        self.iteration = iteration
        self.records = records
        super().__init__(message)


def fw_step_size(k: int) -> float:
    return 2.0 / (k + 2.0)


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    w = np.maximum(v - css[rho] / (rho + 1.0), 0.0)
    s = w.sum()
    if abs(s - 1.0) > 1e-15:
        w /= s
    return w


def surrogate_gap(gram: GramSystem, weights) -> float:
    """FW gap of a mixture against the last atom of ``gram`` (the LMO candidate).

    ``weights`` are the mixture weights over the first k atoms. The linearized
    cost of an atom j at the mixture is c_j + (H beta)_j.
    """
    beta = np.asarray(weights, dtype=float)
    k = beta.size
    hb = gram.H[:k, :k] @ beta
    lin_mix = float(gram.c[:k] @ beta + beta @ hb)
    lin_cand = float(gram.c[k] + gram.H[k, :k] @ beta)
    return lin_mix - lin_cand


def fw_gap(mix: Mixture, candidate: TrajectoryEnsemble, gram: GramSystem, cost) -> float:
    ext = extend_gram(gram, mix.atoms, candidate, cost)
    return surrogate_gap(ext, mix.weights)


def fcfw_weight_qp(gram: GramSystem, alpha_init, opts: SolverOptions) -> np.ndarray:
    """Projected gradient on min 0.5 a.H.a + c.a over the simplex; best iterate returned."""
    H, c = gram.H, gram.c
    a = np.asarray(alpha_init, dtype=float)
    if a.shape != c.shape:
        raise ValueError(f"weight vector has length {a.size}, system has {c.size} atoms")
    if c.size == 1:
        return np.ones(1)
    step = opts.qp_pgd_learning_rate
    if step is None:
        step = 1.0 / (max(np.linalg.eigvalsh(H)[-1], 0.0) + 1.0)
    best, best_val = a.copy(), qp_value(gram, a)
    for _ in range(opts.qp_pgd_steps):
        a = simplex_project(a - step * (H @ a + c))
        val = qp_value(gram, a)
        if val < best_val:
            best, best_val = a, val
    return best


def initial_ensemble(cfg: ScenarioConfig, sources) -> TrajectoryEnsemble:
    """Zero-control rollouts from every source state."""
    spec, grid = cfg.dynamics, cfg.grid
    U = np.zeros((grid.N_t, spec.control_dim))
    states = np.stack([rollout(spec, grid, xi, U) for xi, _ in sources])
    return TrajectoryEnsemble(
        states=states,
        controls=np.zeros((len(sources), grid.N_t, spec.control_dim)),
        weights=np.array([w for _, w in sources], dtype=float),
        grid=grid,
        pos_dim=spec.pos_dim,
    )


def config_sources(cfg: ScenarioConfig):
    seed = cfg.initial.seed if cfg.initial.seed is not None else cfg.solver.rng_seed
    return sample_initial_states(cfg.initial, seed)


Callback = Callable[[int, Mixture, GramSystem], None]


def _run(cfg: ScenarioConfig, fully_corrective: bool, threads: int | None,
         on_iteration: Callback | None) -> RunResult:
    opts, cost, spec, grid = cfg.solver, cfg.cost, cfg.dynamics, cfg.grid
    sources = config_sources(cfg)
    try:
        atom0 = initial_ensemble(cfg, sources)
    except DynamicsError as exc:
        raise SolverError(f"initial rollout failed: {exc}", 0, []) from exc
    atoms: list[TrajectoryEnsemble] = [atom0]
    gram = extend_gram(GramSystem(), [], atom0, cost)
    beta = np.ones(1)
    records = [IterationRecord(0, qp_value(gram, beta))]
    if on_iteration is not None:
        on_iteration(0, Mixture(tuple(atoms), beta.copy()), gram)
    warm = None
    for k in range(opts.outer_iterations):
        mix = Mixture(tuple(atoms), beta.copy())
        field_k = FrozenField.from_mixture(mix, cost, spec.pos_dim)
        t0 = time.perf_counter()
        try:
            cand, _ = solve_lmo_ensemble(sources, field_k, cost, spec, grid, opts,
                                         warm_starts=warm, threads=threads,
                                         iteration=k)
        except LMOError as exc:
            raise SolverError(f"LMO failed at outer iteration {k}: {exc}", k, records) from exc
        lmo_seconds = time.perf_counter() - t0
        if opts.warm_start:
            warm = cand.controls

        ext = extend_gram(gram, atoms, cand, cost)
        records[-1].gap_surrogate = surrogate_gap(ext, beta)
        records[-1].lmo_seconds = lmo_seconds
        if fully_corrective:
            beta = fcfw_weight_qp(ext, np.append(beta, 0.0), opts)
            atoms.append(cand)
            gram = ext
        else:
            beta, keep = combine_weights(beta, fw_step_size(k), opts.weight_prune_tol)
            atoms = [(atoms + [cand])[i] for i in keep]
            gram = ext.subset(keep)
        records.append(IterationRecord(k + 1, qp_value(gram, beta)))
        log.info("iter %d  J=%.10g  gap=%.3e  lmo=%.2fs", k, records[-1].objective,
                 records[-2].gap_surrogate, lmo_seconds)
        if on_iteration is not None:
            on_iteration(k + 1, Mixture(tuple(atoms), beta.copy()), gram)
        if opts.gap_tol > 0 and records[-2].gap_surrogate <= opts.gap_tol:
            break

    final = records[-1].objective
    for r in records:
        r.gap_displayed = r.objective - final
    return RunResult(records, Mixture(tuple(atoms), beta), gram, cfg, sources)


def fw_run(cfg: ScenarioConfig, threads: int | None = 1, on_iteration: Callback | None = None) -> RunResult:
    """Frank-Wolfe with step sizes 2/(k+2)."""
    return _run(cfg, False, threads, on_iteration)


def fcfw_run(cfg: ScenarioConfig, threads: int | None = 1, on_iteration: Callback | None = None) -> RunResult:
    """Fully-corrective variant: weights re-optimized over the whole dictionary each iteration."""
    return _run(cfg, True, threads, on_iteration)


def run(cfg: ScenarioConfig, threads: int | None = 1, on_iteration: Callback | None = None) -> RunResult:
    fn = fcfw_run if cfg.solver.algorithm == "fcfw" else fw_run
    return fn(cfg, threads=threads, on_iteration=on_iteration)
