"""Independent reference evaluators, written as plain loops.

Nothing here calls into the vectorized or compiled paths; these exist only to
cross-check them.
"""
from __future__ import annotations

import math

import numpy as np


def _l0(cost, p, u):
    val = 0.0
    coef = 0.5 * cost.control_weight if cost.control_form == "half" else cost.control_weight
    for uj in u:
        val += coef * uj * uj
    for ob in cost.obstacles:
        d = math.sqrt(sum((pi - ci) ** 2 for pi, ci in zip(p, ob.center)))
        pen = ob.radius + ob.margin - d
        if pen > 0:
            val += ob.gain * pen * pen
    return val


def _psi(cost, p):
    if cost.terminal_kind == "quadratic":
        if cost.target is None:
            return 0.0
        return 0.5 * cost.terminal_weight * sum((pi - ti) ** 2 for pi, ti in zip(p, cost.target))
    r = math.sqrt(sum(pi * pi for pi in p))
    return cost.terminal_weight * (r - cost.target_radius) ** 2


def _w(cost, p, q):
    d2 = sum((a - b) ** 2 for a, b in zip(p, q))
    return math.exp(-d2 / (2.0 * cost.kernel_width**2))


def naive_linear_cost(ens, cost) -> float:
    dt = ens.grid.dt
    d = ens.pos_dim
    total = 0.0
    for m in range(ens.size):
        s = 0.0
        for n in range(ens.grid.N_t):
            s += dt * _l0(cost, ens.states[m, n, :d], ens.controls[m, n])
        s += _psi(cost, ens.states[m, -1, :d])
        total += ens.weights[m] * s
    return total


def naive_gram_entry(ens_i, ens_j, cost) -> float:
    dt = ens_i.grid.dt
    d = ens_i.pos_dim
    total = 0.0
    for n in range(ens_i.grid.N_t):
        for a in range(ens_i.size):
            for b in range(ens_j.size):
                total += ens_i.weights[a] * ens_j.weights[b] * _w(
                    cost, ens_i.states[a, n, :d], ens_j.states[b, n, :d])
    return 2.0 * cost.interaction_weight * dt * total


def naive_objective(atoms, weights, cost) -> float:
    """Discretized objective of a mixture, evaluated directly as
    sum_i beta_i (running + terminal) + lambda dt sum_n (double sum over all particles)."""
    linear = sum(b * naive_linear_cost(a, cost) for b, a in zip(weights, atoms))
    dt = atoms[0].grid.dt
    d = atoms[0].pos_dim
    particles = [(b * a.weights[m], a, m) for b, a in zip(weights, atoms) for m in range(a.size)]
    inter = 0.0
    for n in range(atoms[0].grid.N_t):
        for wp, ap, mp in particles:
            for wq, aq, mq in particles:
                inter += wp * wq * _w(cost, ap.states[mp, n, :d], aq.states[mq, n, :d])
    return linear + cost.interaction_weight * dt * inter


def naive_linearized_cost(field_atoms, field_weights, cost, n, p, u) -> float:
    """g(t_n, p, u) by direct double summation over frozen atoms and their sources."""
    val = _l0(cost, p, u)
    acc = 0.0
    for b, atom in zip(field_weights, field_atoms):
        for m in range(atom.size):
            acc += b * atom.weights[m] * _w(cost, p, atom.states[m, n, :atom.pos_dim])
    return val + 2.0 * cost.interaction_weight * acc


def central_differences(f, U, h: float = 1e-6) -> np.ndarray:
    U = np.array(U, dtype=float)
    G = np.zeros_like(U)
    for idx in np.ndindex(U.shape):
        Up = U.copy()
        Um = U.copy()
        Up[idx] += h
        Um[idx] -= h
        G[idx] = (f(Up) - f(Um)) / (2.0 * h)
    return G


def dense_lq(xi, target, alpha: float, terminal_weight: float, T: float, N_t: int):
    """Single integrator, cost dt*sum (alpha/2)|u_n|^2 + (w/2)|x_N - target|^2.

    Builds the dense quadratic 0.5 U'PU + q'U + r over stacked controls, with
    x_N = xi + dt * sum_n u_n. Returns (P, q, r, U_opt, J_opt).
    """
    xi = np.asarray(xi, dtype=float)
    target = np.asarray(target, dtype=float)
    d = xi.size
    dt = T / N_t
    S = np.tile(np.eye(d), (1, N_t)) * dt  # x_N - xi = S @ U
    e = xi - target
    P = alpha * dt * np.eye(d * N_t) + terminal_weight * S.T @ S
    q = terminal_weight * S.T @ e
    r = 0.5 * terminal_weight * e @ e
    U = np.linalg.solve(P, -q)
    J = 0.5 * U @ P @ U + q @ U + r
    return P, q, r, U.reshape(N_t, d), float(J)
