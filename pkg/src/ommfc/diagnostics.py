"""Verification and export: history/snapshot CSVs, slope fits, PSD checks, gradient audits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linearized_ocp
from .measure import GramSystem, Mixture, make_ensemble
from .scenario import CostSpec, DynamicsSpec, Obstacle, ScenarioConfig, TimeGrid
from .dynamics import project_control, rollout
from .oracles import central_differences

HISTORY_HEADER = ("iter", "objective", "gap_displayed", "gap_surrogate", "lmo_seconds")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_history(result, path, *, timing: bool = True) -> Path:
    """One CSV row per recorded iterate. ``timing=False`` writes 0 for the
    LMO wall time so that repeated runs produce identical files."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for r in result.records:
            w.writerow([r.k, _fmt(r.objective), _fmt(r.gap_displayed), _fmt(r.gap_surrogate),
                        _fmt(r.lmo_seconds if timing else 0.0)])
    return path


def read_history(path) -> dict[str, np.ndarray]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {key: np.array([float(r[key]) for r in rows]) for key in HISTORY_HEADER}
    out["iter"] = out["iter"].astype(int)
    return out


def snapshot_rows(mix: Mixture, n: int) -> list[tuple]:
    """(time index, atom, atom weight, source, source weight, *position) for
    every positive-weight atom and every source."""
    rows = []
    for i, (b, atom) in enumerate(zip(mix.weights, mix.atoms)):
        if b <= 0:
            continue
        for m in range(atom.size):
            rows.append((n, i, float(b), m, float(atom.weights[m]), *map(float, atom.positions[m, n])))
    return rows


def write_snapshots(result, times, out_dir) -> list[Path]:
    mix = result.mixture
    grid = mix.atoms[0].grid
    d = mix.atoms[0].pos_dim
    out_dir = Path(out_dir)
    for n in times:
        if not 0 <= n <= grid.N_t:
            raise IndexError(f"snapshot index {n} outside [0, {grid.N_t}]")
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    header = ["time_index", "atom", "atom_weight", "source", "source_weight"] + [f"x{j}" for j in range(d)]
    for n in times:
        p = out_dir / f"snapshot_t{n}.csv"
        with p.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in snapshot_rows(mix, n):
                w.writerow([row[0], row[1], _fmt(row[2]), row[3], _fmt(row[4]), *map(_fmt, row[5:])])
        paths.append(p)
    return paths


def snapshot_mass(path) -> float:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return math.fsum(float(r["atom_weight"]) * float(r["source_weight"]) for r in csv.DictReader(fh))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    used: int
    excluded: int


def _history_arrays(history):
    if isinstance(history, dict):
        return np.asarray(history["iter"]), np.asarray(history["gap_displayed"], dtype=float)
    records = getattr(history, "records", history)
    return np.array([r.k for r in records]), np.array([r.gap_displayed for r in records])


def loglog_fit(history, k_min: int, k_max: int) -> SlopeFit:
    """Least-squares line through (log k, log gap) for k_min <= k <= k_max.

    Rows with a nonpositive gap are skipped and counted in ``excluded``.
    """
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    k, gap = _history_arrays(history)
    window = (k >= k_min) & (k <= k_max)
    ok = window & (gap > 0)
    if ok.sum() < 3:
        raise ValueError(f"only {int(ok.sum())} usable points in [{k_min}, {k_max}]; need 3")
    slope, intercept = np.polyfit(np.log(k[ok]), np.log(gap[ok]), 1)
    return SlopeFit(float(slope), float(intercept), int(ok.sum()), int((window & ~ok).sum()))


def fit_loglog_slope(history, k_min: int, k_max: int) -> float:
    return loglog_fit(history, k_min, k_max).slope


def check_gram_psd(gram: GramSystem | np.ndarray) -> tuple[float, bool]:
    H = np.asarray(gram.H if isinstance(gram, GramSystem) else gram, dtype=float)
    if H.size == 0:
        raise ValueError("empty Gram matrix")
    scale = max(1.0, float(np.max(np.abs(H))))
    if np.max(np.abs(H - H.T)) > 1e-10 * scale:
        raise ValueError("Gram matrix is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    return float(eig[0]), bool(eig[0] >= -1e-8 * max(1.0, float(eig[-1])))


# --- gradient audit ----------------------------------------------------------


@dataclass
class AuditReport:
    family: str
    trials: int
    max_rel_error: float
    max_zero_abs_error: float
    tolerance: float = 1e-5

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance and self.max_zero_abs_error < 1e-12


def _random_field(rng, spec, grid, cost, center, spread, atoms=2, sources=2):
    ens = []
    for _ in range(atoms):
        st, ct = [], []
        for _ in range(sources):
            xi = center + spread * rng.standard_normal(spec.state_dim)
            U = project_control(spec, rng.standard_normal((grid.N_t, spec.control_dim)) * _u_scale(spec))
            st.append(rollout(spec, grid, xi, U))
            ct.append(U)
        ens.append(make_ensemble(spec, grid, st, ct, np.full(sources, 1.0 / sources)))
    w = rng.dirichlet(np.ones(atoms))
    return linearized_ocp.FrozenField.from_mixture(Mixture(tuple(ens), w), cost, spec.pos_dim)


def _u_scale(spec: DynamicsSpec) -> float:
    return 0.5 if spec.kind == "single_integrator" else 0.5 * spec.control_bound


def random_instance(rng: np.random.Generator, spec: DynamicsSpec, N_t: int = 6):
    """A small randomized LMO instance: (xi, U, field, cost, grid)."""
    if spec.kind == "single_integrator":
        d = spec.dim
        grid = TimeGrid(T=float(rng.uniform(0.5, 2.0)), N_t=N_t)
        xi = rng.standard_normal(d)
        obstacles = tuple(Obstacle(center=tuple(xi + rng.standard_normal(d) * 0.5),
                                   radius=float(rng.uniform(0.3, 0.8)), margin=0.1,
                                   gain=float(rng.uniform(1, 50))) for _ in range(2))
        cost = CostSpec(control_weight=float(rng.uniform(0.05, 1.0)), control_form="half",
                        terminal_kind="quadratic", terminal_weight=float(rng.uniform(1, 10)),
                        target=tuple(rng.standard_normal(d) + 2.0), obstacles=obstacles,
                        interaction_weight=float(rng.uniform(0.1, 2.0)),
                        kernel_width=float(rng.uniform(0.3, 1.0)))
        field = _random_field(rng, spec, grid, cost, np.concatenate([xi]), 0.3)
    else:
        grid = TimeGrid(T=float(rng.uniform(300.0, 900.0)), N_t=N_t)
        r0 = rng.uniform(6800.0, 7200.0)
        th = rng.uniform(0, 2 * np.pi)
        vc = math.sqrt(spec.grav_param / r0)
        xi = np.array([r0 * math.cos(th), r0 * math.sin(th), rng.normal(0, 50.0),
                       -vc * math.sin(th), vc * math.cos(th), rng.normal(0, 0.05)])
        cost = CostSpec(control_weight=float(rng.uniform(1e3, 1e4)), control_form="full",
                        terminal_kind="radius", terminal_weight=float(rng.uniform(1.0, 10.0)),
                        target_radius=float(rng.uniform(7200.0, 8000.0)),
                        interaction_weight=float(rng.uniform(100.0, 1000.0)),
                        kernel_width=float(rng.uniform(30.0, 200.0)))
        spread = np.array([20.0, 20.0, 20.0, 0.02, 0.02, 0.02])
        field = _random_field(rng, spec, grid, cost, xi, spread)
    U = project_control(spec, rng.standard_normal((grid.N_t, spec.control_dim)) * _u_scale(spec))
    return xi, U, field, cost, grid


def _fd_step(spec: DynamicsSpec) -> float:
    return 1e-6 if spec.kind == "single_integrator" else 1e-6 * spec.control_bound


def audit_gradients(cfg: ScenarioConfig, trials: int = 20, seed: int = 0, N_t: int = 6) -> AuditReport:
    """Compare adjoint gradients against central differences on random instances
    of the scenario's dynamics family. Failures are reported, never raised."""
    spec = cfg.dynamics
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        xi, U, field, cost, grid = random_instance(rng, spec, N_t)
        G = linearized_ocp.lmo_gradient(U, xi, field, cost, spec, grid)
        fd = central_differences(lambda V: linearized_ocp.lmo_cost(V, xi, field, cost, spec, grid),
                                 U, _fd_step(spec))
        scale = max(float(np.max(np.abs(fd))), 1e-300)
        worst = max(worst, float(np.max(np.abs(G - fd))) / scale)
    zero_err = _zero_dependence_error(rng, spec, N_t)
    return AuditReport(spec.kind, trials, worst, zero_err)


def _zero_dependence_error(rng, spec: DynamicsSpec, N_t: int) -> float:
    """Pure control-effort instance with half the controls at zero: the cost does
    not vary to first order in those entries, so both gradients must vanish."""
    grid = TimeGrid(T=1.0, N_t=N_t)
    xi = np.ones(spec.state_dim) * (7000.0 if spec.kind == "keplerian" else 1.0)
    if spec.kind == "keplerian":
        xi[3:] = 0.0
        xi[4] = math.sqrt(spec.grav_param / np.linalg.norm(xi[:3]))
    cost = CostSpec(control_weight=1.0, control_form="full", terminal_kind="quadratic", terminal_weight=0.0)
    field = linearized_ocp.FrozenField(None, 0.0, 1.0, spec.pos_dim)
    U = project_control(spec, rng.standard_normal((grid.N_t, spec.control_dim)) * _u_scale(spec))
    U[::2] = 0.0
    G = linearized_ocp.lmo_gradient(U, xi, field, cost, spec, grid)
    fd = central_differences(lambda V: linearized_ocp.lmo_cost(V, xi, field, cost, spec, grid),
                             U, _fd_step(spec))
    return float(max(np.max(np.abs(G[::2])), np.max(np.abs(fd[::2]))))


# --- oracle equivalence --------------------------------------------------------


@dataclass
class OracleReport:
    trials: int
    max_objective_rel_error: float
    max_gram_abs_error: float

    @property
    def passed(self) -> bool:
        return self.max_objective_rel_error < 1e-10 and self.max_gram_abs_error < 1e-14


def random_mixture(rng: np.random.Generator, spec: DynamicsSpec | None = None):
    """Small random single-integrator mixture with obstacles: (atoms, weights, cost)."""
    spec = spec or DynamicsSpec(kind="single_integrator", dim=2)
    d = spec.dim
    grid = TimeGrid(T=float(rng.uniform(0.5, 2.0)), N_t=int(rng.integers(1, 9)))
    k = int(rng.integers(1, 4))
    M = int(rng.integers(1, 5))
    cost = CostSpec(control_weight=float(rng.uniform(0.05, 1.0)), control_form="half",
                    terminal_kind="quadratic", terminal_weight=float(rng.uniform(1, 10)),
                    target=tuple(rng.standard_normal(d)),
                    obstacles=(Obstacle(center=tuple(0.5 * rng.standard_normal(d)), radius=0.5,
                                        margin=0.1, gain=float(rng.uniform(1, 100))),),
                    interaction_weight=float(rng.uniform(0.1, 2.0)),
                    kernel_width=float(rng.uniform(0.2, 1.0)))
    src_w = rng.dirichlet(np.ones(M))
    xs = rng.standard_normal((M, d))
    atoms = []
    for _ in range(k):
        U = rng.standard_normal((M, grid.N_t, d))
        states = [rollout(spec, grid, xs[m], U[m]) for m in range(M)]
        atoms.append(make_ensemble(spec, grid, states, U, src_w))
    return atoms, rng.dirichlet(np.ones(k)), cost


def oracle_equivalence(trials: int = 50, seed: int = 0) -> OracleReport:
    from .measure import build_gram, extend_gram, objective
    from .oracles import naive_objective

    rng = np.random.default_rng(seed)
    worst_obj = worst_gram = 0.0
    for _ in range(trials):
        atoms, w, cost = random_mixture(rng)
        full = build_gram(atoms, cost)
        inc = GramSystem()
        for i, a in enumerate(atoms):
            inc = extend_gram(inc, atoms[:i], a, cost)
        worst_gram = max(worst_gram, float(np.max(np.abs(full.H - inc.H))),
                         float(np.max(np.abs(full.c - inc.c))))
        J = objective(Mixture(tuple(atoms), w), full)
        ref = naive_objective(atoms, w, cost)
        worst_obj = max(worst_obj, abs(J - ref) / max(abs(ref), 1e-300))
    return OracleReport(trials, worst_obj, worst_gram)


# --- orbit conservation --------------------------------------------------------


@dataclass
class OrbitReport:
    max_radius_error: float
    energy_drift: float

    @property
    def passed(self) -> bool:
        return self.max_radius_error < 1.0 and self.energy_drift < 1e-6


def orbit_conservation(radius: float = 7000.0, T: float = 6000.0, N_t: int = 150,
                       grav_param: float = 398600.0) -> OrbitReport:
    """Zero-thrust propagation of a circular orbit."""
    from .dynamics import circular_orbit_state, specific_energy

    spec = DynamicsSpec(kind="keplerian", grav_param=grav_param, control_bound=1e-3)
    grid = TimeGrid(T=T, N_t=N_t)
    X = rollout(spec, grid, circular_orbit_state(spec, radius), np.zeros((N_t, 3)))
    r = np.linalg.norm(X[:, :3], axis=1)
    E = specific_energy(spec, X)
    return OrbitReport(float(np.max(np.abs(r - radius))), float(np.max(np.abs(E - E[0])) / abs(E[0])))


# --- PSD on a short run ----------------------------------------------------------


def psd_smoke(cfg: ScenarioConfig, iterations: int = 4) -> tuple[float, bool]:
    """Worst PSD margin over every Gram matrix of a short FCFW run."""
    from .solver import fcfw_run

    worst = [np.inf, True]

    def check(k, mix, gram):
        lo, ok = check_gram_psd(gram)
        worst[0] = min(worst[0], lo)
        worst[1] = worst[1] and ok

    fcfw_run(cfg.with_solver(outer_iterations=iterations), on_iteration=check)
    return float(worst[0]), bool(worst[1])
