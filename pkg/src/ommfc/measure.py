"""Discrete occupation measures: trajectory ensembles, mixtures and the (H, c) system.

An ensemble carries one aggregated pair (running measure, terminal measure): M
integrated trajectories with source weights. A mixture is a convex combination
of ensembles. With left-endpoint quadrature on the shared grid the objective of
a mixture with weights ``beta`` is exactly ``c @ beta + 0.5 * beta @ H @ beta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

from .scenario import CostSpec, DynamicsSpec, TimeGrid


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    states: np.ndarray    # (M, N_t + 1, state_dim)
    controls: np.ndarray  # (M, N_t, control_dim)
    weights: np.ndarray   # (M,)
    grid: TimeGrid
    pos_dim: int

    def __post_init__(self):
        for arr in (self.states, self.controls, self.weights):
            arr.setflags(write=False)
        M = self.weights.shape[0]
        if self.states.shape[:2] != (M, self.grid.N_t + 1) or self.controls.shape[:2] != (M, self.grid.N_t):
            raise GridMismatch("ensemble arrays do not match the time grid")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("source weights must sum to 1")

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def positions(self) -> np.ndarray:
        """(M, N_t + 1, pos_dim) view of the spatial part of each trajectory."""
        return self.states[:, :, : self.pos_dim]


@dataclass(frozen=True, eq=False)
class Mixture:
    atoms: tuple[TrajectoryEnsemble, ...]
    weights: np.ndarray

    def __post_init__(self):
        self.weights.setflags(write=False)
        if len(self.atoms) != self.weights.shape[0]:
            raise ValueError("one weight per atom required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("mixture weights must lie on the simplex")
        if self.atoms:
            g, m = self.atoms[0].grid, self.atoms[0].size
            if any(a.grid != g or a.size != m for a in self.atoms):
                raise GridMismatch("all atoms must share one grid and one source count")


@dataclass
class GramSystem:
    H: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    c: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def k(self) -> int:
        return self.c.shape[0]

    def subset(self, keep) -> "GramSystem":
        keep = np.asarray(keep, dtype=int)
        return GramSystem(self.H[np.ix_(keep, keep)].copy(), self.c[keep].copy())


def make_ensemble(spec: DynamicsSpec, grid: TimeGrid, states, controls, weights) -> TrajectoryEnsemble:
    return TrajectoryEnsemble(
        states=np.array(states, dtype=float),
        controls=np.array(controls, dtype=float),
        weights=np.array(weights, dtype=float),
        grid=grid,
        pos_dim=spec.pos_dim,
    )


# --- cost components ---------------------------------------------------------


def kernel(cost: CostSpec, r):
    """Isotropic Gaussian kernel exp(-r^2 / (2 sigma^2))."""
    r = np.asarray(r, dtype=float)
    return np.exp(-(r * r) / (2.0 * cost.kernel_width**2))


def obstacle_potential(cost: CostSpec, x) -> np.ndarray | float:
    """Sum over obstacles of gain * max(0, (R + margin) - |x - c|)^2.

    ``x`` may carry leading batch dimensions.
    """
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for ob in cost.obstacles:
        dist = np.linalg.norm(x - np.asarray(ob.center), axis=-1)
        total = total + ob.gain * np.maximum(0.0, ob.effective_radius - dist) ** 2
    return total if total.ndim else float(total)


def control_cost(cost: CostSpec, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return cost.control_coef * np.sum(u * u, axis=-1)


def terminal_cost(cost: CostSpec, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if cost.terminal_kind == "quadratic":
        if cost.target is None:
            return np.zeros(p.shape[:-1])
        return cost.terminal_coef * np.sum((p - np.asarray(cost.target)) ** 2, axis=-1)
    return cost.terminal_coef * (np.linalg.norm(p, axis=-1) - cost.target_radius) ** 2


def cost_components(ens: TrajectoryEnsemble, cost: CostSpec) -> dict[str, float]:
    """Source-weighted control, obstacle and terminal parts of the linear cost."""
    dt = ens.grid.dt
    pos = ens.positions
    ctrl = dt * control_cost(cost, ens.controls).sum(axis=1)
    obs = dt * np.asarray(obstacle_potential(cost, pos[:, :-1])).sum(axis=1) if cost.obstacles \
        else np.zeros(ens.size)
    term = terminal_cost(cost, pos[:, -1])
    w = ens.weights
    return {"control": float(w @ ctrl), "obstacle": float(w @ obs), "terminal": float(w @ term)}


def atom_linear_cost(ens: TrajectoryEnsemble, cost: CostSpec) -> float:
    """c_i: source-weighted running cost (left Riemann sum) plus terminal cost."""
    dt = ens.grid.dt
    pos = ens.positions
    running = control_cost(cost, ens.controls)
    if cost.obstacles:
        running = running + obstacle_potential(cost, pos[:, :-1])
    per_source = dt * running.sum(axis=1) + terminal_cost(cost, pos[:, -1])
    return float(ens.weights @ per_source)


def interaction_gram_entry(ens_i: TrajectoryEnsemble, ens_j: TrajectoryEnsemble, cost: CostSpec) -> float:
    """H_ij = 2 lambda dt sum_n sum_{m,m'} pi_m pi_m' W(|x_i(t_n, m) - x_j(t_n, m')|).

    Each term is formed symmetrically and the sum is exactly rounded, so
    swapping the arguments gives a bit-identical result.
    """
    if ens_i.grid != ens_j.grid:
        raise GridMismatch("ensembles live on different time grids")
    if cost.interaction_weight == 0.0:
        return 0.0
    a = np.swapaxes(ens_i.positions[:, :-1], 0, 1)  # (N_t, M_i, d)
    b = np.swapaxes(ens_j.positions[:, :-1], 0, 1)
    diff = a[:, :, None, :] - b[:, None, :, :]
    K = np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * cost.kernel_width**2))
    ww = ens_i.weights[:, None] * ens_j.weights[None, :]
    s = math.fsum((K * ww).ravel())
    return 2.0 * cost.interaction_weight * ens_i.grid.dt * s


def extend_gram(gram: GramSystem, atoms, new_atom: TrajectoryEnsemble, cost: CostSpec) -> GramSystem:
    """Return a new system with one more row/column; existing entries are copied verbatim."""
    k = gram.k
    if len(atoms) != k:
        raise ValueError(f"gram has {k} atoms but {len(atoms)} were supplied")
    H = np.empty((k + 1, k + 1))
    H[:k, :k] = gram.H
    for i, atom in enumerate(atoms):
        H[i, k] = H[k, i] = interaction_gram_entry(atom, new_atom, cost)
    H[k, k] = interaction_gram_entry(new_atom, new_atom, cost)
    c = np.append(gram.c, atom_linear_cost(new_atom, cost))
    return GramSystem(H, c)


def build_gram(atoms, cost: CostSpec) -> GramSystem:
    """Full rebuild, filling the upper triangle and mirroring it."""
    k = len(atoms)
    H = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            H[i, j] = H[j, i] = interaction_gram_entry(atoms[i], atoms[j], cost)
    c = np.array([atom_linear_cost(a, cost) for a in atoms])
    return GramSystem(H.reshape(k, k), c.reshape(k))


def qp_value(gram: GramSystem, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    return float(gram.c @ beta + 0.5 * beta @ gram.H @ beta)


def objective(mix: Mixture, gram: GramSystem) -> float:
    """J(beta) = c.beta + beta.H.beta / 2."""
    if gram.k != len(mix.atoms):
        raise ValueError(f"gram has {gram.k} atoms, mixture has {len(mix.atoms)}")
    return qp_value(gram, mix.weights)


def objective_breakdown(mix: Mixture, gram: GramSystem, cost: CostSpec) -> dict[str, float]:
    parts = {"control": 0.0, "obstacle": 0.0, "terminal": 0.0}
    for b, atom in zip(mix.weights, mix.atoms):
        if b > 0:
            for key, val in cost_components(atom, cost).items():
                parts[key] += b * val
    parts["interaction"] = 0.5 * float(mix.weights @ gram.H @ mix.weights)
    parts["total"] = objective(mix, gram)
    return parts


# --- mixtures ----------------------------------------------------------------


def combine_weights(weights, step: float, prune_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """FW weight update. Returns (new weights, indices kept out of the k+1 atoms)."""
    if not 0.0 < step <= 1.0:
        raise ValueError(f"step size must lie in (0, 1], got {step}")
    w = np.append((1.0 - step) * np.asarray(weights, dtype=float), step)
    keep = np.flatnonzero(w >= prune_tol)
    w = w[keep]
    return w / w.sum(), keep


def convex_combine(mix: Mixture, new_atom: TrajectoryEnsemble, step: float,
                   prune_tol: float = 1e-12) -> Mixture:
    w, keep = combine_weights(mix.weights, step, prune_tol)
    atoms = mix.atoms + (new_atom,)
    return Mixture(tuple(atoms[i] for i in keep), w)


def active_field(mix: Mixture) -> tuple[np.ndarray, np.ndarray]:
    """Frozen particle cloud of the mixture: positions (N_t, P, d) at the left
    quadrature nodes and weights beta_i * pi_m (P,), zero-weight atoms skipped."""
    pos, w = [], []
    for b, atom in zip(mix.weights, mix.atoms):
        if b > 0:
            pos.append(atom.positions[:, :-1])
            w.append(b * atom.weights)
    if not pos:
        raise ValueError("mixture has no atom with positive weight")
    Y = np.ascontiguousarray(np.swapaxes(np.concatenate(pos, axis=0), 0, 1))
    return Y, np.concatenate(w)
