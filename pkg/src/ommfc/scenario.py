"""Problem statements: dynamics, costs, initial distribution, grid and solver options.

Scenario files are JSON documents. See README.md for the schema and defaults.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

DYNAMICS_KINDS = ("single_integrator", "keplerian")
TERMINAL_KINDS = ("quadratic", "radius")
INITIAL_KINDS = ("point_mass", "discrete", "sampled")
DENSITY_KINDS = ("uniform_box", "gaussian")
ALGORITHMS = ("fw", "fcfw")

WEIGHT_SUM_TOL = 1e-12


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario data.

    ``field`` holds the dotted path of the offending entry (e.g. ``grid.T``).
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N_t: int

    @property
    def dt(self) -> float:
        return self.T / self.N_t

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N_t + 1) * self.dt


@dataclass(frozen=True)
class DynamicsSpec:
    kind: str = "single_integrator"
    dim: int = 2
    grav_param: float = 398600.0
    control_bound: float | None = None

    @property
    def state_dim(self) -> int:
        return self.dim if self.kind == "single_integrator" else 6

    @property
    def control_dim(self) -> int:
        return self.dim if self.kind == "single_integrator" else 3

    @property
    def pos_dim(self) -> int:
        """Number of leading state entries that are a spatial position."""
        return self.dim if self.kind == "single_integrator" else 3

    @property
    def code(self) -> int:
        return DYNAMICS_KINDS.index(self.kind)


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, ...]
    radius: float
    margin: float = 0.0
    gain: float = 1e3

    @property
    def effective_radius(self) -> float:
        return self.radius + self.margin


@dataclass(frozen=True)
class CostSpec:
    """Running, terminal and interaction cost parameters.

    ``control_form`` selects the running control cost: ``"half"`` gives
    ``(w/2)|u|^2`` and ``"full"`` gives ``w|u|^2``. ``terminal_kind`` is
    ``"quadratic"`` for ``(w/2)|p - target|^2`` or ``"radius"`` for
    ``w (|p| - target_radius)^2``. ``interaction_weight`` multiplies the full
    time-aligned double integral of the Gaussian kernel.
    """

    control_weight: float = 0.0
    control_form: str = "half"
    terminal_kind: str = "quadratic"
    terminal_weight: float = 0.0
    target: tuple[float, ...] | None = None
    target_radius: float | None = None
    obstacles: tuple[Obstacle, ...] = ()
    interaction_weight: float = 0.0
    kernel_width: float = 1.0

    @property
    def control_coef(self) -> float:
        return 0.5 * self.control_weight if self.control_form == "half" else self.control_weight

    @property
    def terminal_coef(self) -> float:
        return 0.5 * self.terminal_weight if self.terminal_kind == "quadratic" else self.terminal_weight


@dataclass(frozen=True)
class InitialDistribution:
    kind: str = "point_mass"
    states: tuple[tuple[float, ...], ...] = ()
    weights: tuple[float, ...] = ()
    density: dict | None = None
    count: int = 0
    seed: int | None = None


@dataclass(frozen=True)
class SolverOptions:
    algorithm: str = "fcfw"
    outer_iterations: int = 100
    lmo_steps: int = 400
    lmo_learning_rate: float = 0.2
    lmo_learning_rate_final: float | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    warm_start: bool = True
    lmo_restarts: int = 0
    lmo_restart_scale: float = 1.0
    qp_pgd_steps: int = 2000
    qp_pgd_learning_rate: float | None = None
    gap_tol: float = 0.0
    weight_prune_tol: float = 1e-12
    rng_seed: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dynamics: DynamicsSpec
    grid: TimeGrid
    cost: CostSpec
    initial: InitialDistribution
    solver: SolverOptions = field(default_factory=SolverOptions)
    description: str = ""

    def with_solver(self, **changes: Any) -> "ScenarioConfig":
        return replace(self, solver=replace(self.solver, **changes))


# --- parsing -----------------------------------------------------------------


def _get(d: dict, key: str, path: str, *, required: bool = False, default: Any = None):
    if key in d:
        return d[key]
    if required:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return default


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    return value


def _vec(value: Any, path: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ScenarioError(path, "expected a non-empty list of numbers")
    return tuple(_num(v, f"{path}[{i}]") for i, v in enumerate(value))


def _section(raw: dict, key: str, *, required: bool = True) -> dict:
    sec = _get(raw, key, "", required=required, default={})
    if not isinstance(sec, dict):
        raise ScenarioError(key, "expected an object")
    return sec


def _check_keys(d: dict, allowed: set[str], path: str) -> None:
    for key in d:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}" if path else key, "unknown field")


def _parse_dynamics(d: dict) -> DynamicsSpec:
    _check_keys(d, {"kind", "dim", "grav_param", "control_bound"}, "dynamics")
    kind = _get(d, "kind", "dynamics", required=True)
    if kind not in DYNAMICS_KINDS:
        raise ScenarioError("dynamics.kind", f"unknown dynamics kind {kind!r}")
    if kind == "single_integrator":
        return DynamicsSpec(kind=kind, dim=_int(_get(d, "dim", "dynamics", default=2), "dynamics.dim"))
    bound = _get(d, "control_bound", "dynamics", required=True)
    return DynamicsSpec(
        kind=kind,
        dim=3,
        grav_param=_num(_get(d, "grav_param", "dynamics", default=398600.0), "dynamics.grav_param"),
        control_bound=_num(bound, "dynamics.control_bound"),
    )


def _parse_cost(d: dict) -> CostSpec:
    _check_keys(d, {"control_weight", "control_form", "terminal", "obstacles",
                    "interaction_weight", "kernel_width"}, "cost")
    term = _get(d, "terminal", "cost", default={})
    if not isinstance(term, dict):
        raise ScenarioError("cost.terminal", "expected an object")
    _check_keys(term, {"kind", "weight", "target", "radius"}, "cost.terminal")
    tkind = term.get("kind", "quadratic")
    if tkind not in TERMINAL_KINDS:
        raise ScenarioError("cost.terminal.kind", f"unknown terminal kind {tkind!r}")
    target = target_radius = None
    if tkind == "quadratic" and "target" in term:
        target = _vec(term["target"], "cost.terminal.target")
    if tkind == "radius":
        target_radius = _num(_get(term, "radius", "cost.terminal", required=True), "cost.terminal.radius")
    obstacles = []
    for i, ob in enumerate(_get(d, "obstacles", "cost", default=[])):
        p = f"cost.obstacles[{i}]"
        if not isinstance(ob, dict):
            raise ScenarioError(p, "expected an object")
        _check_keys(ob, {"center", "radius", "margin", "gain"}, p)
        obstacles.append(Obstacle(
            center=_vec(_get(ob, "center", p, required=True), f"{p}.center"),
            radius=_num(_get(ob, "radius", p, required=True), f"{p}.radius"),
            margin=_num(ob.get("margin", 0.0), f"{p}.margin"),
            gain=_num(ob.get("gain", 1e3), f"{p}.gain"),
        ))
    form = d.get("control_form", "half")
    if form not in ("half", "full"):
        raise ScenarioError("cost.control_form", f"expected 'half' or 'full', got {form!r}")
    return CostSpec(
        control_weight=_num(d.get("control_weight", 0.0), "cost.control_weight"),
        control_form=form,
        terminal_kind=tkind,
        terminal_weight=_num(term.get("weight", 0.0), "cost.terminal.weight"),
        target=target,
        target_radius=target_radius,
        obstacles=tuple(obstacles),
        interaction_weight=_num(d.get("interaction_weight", 0.0), "cost.interaction_weight"),
        kernel_width=_num(d.get("kernel_width", 1.0), "cost.kernel_width"),
    )


def _parse_initial(d: dict) -> InitialDistribution:
    _check_keys(d, {"kind", "state", "states", "weights", "density", "count", "seed"}, "initial")
    kind = _get(d, "kind", "initial", required=True)
    if kind == "point_mass":
        return InitialDistribution(kind=kind, states=(_vec(_get(d, "state", "initial", required=True),
                                                            "initial.state"),), weights=(1.0,))
    if kind == "discrete":
        raw = _get(d, "states", "initial", required=True)
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("initial.states", "expected a non-empty list of states")
        states = tuple(_vec(s, f"initial.states[{i}]") for i, s in enumerate(raw))
        if "weights" in d:
            weights = _vec(d["weights"], "initial.weights")
        else:
            weights = tuple(1.0 / len(states) for _ in states)
        return InitialDistribution(kind=kind, states=states, weights=weights)
    if kind == "sampled":
        density = _get(d, "density", "initial", required=True)
        if not isinstance(density, dict):
            raise ScenarioError("initial.density", "expected an object")
        seed = d.get("seed")
        return InitialDistribution(
            kind=kind,
            density=dict(density),
            count=_int(_get(d, "count", "initial", required=True), "initial.count"),
            seed=None if seed is None else _int(seed, "initial.seed"),
        )
    raise ScenarioError("initial.kind", f"unknown initial distribution kind {kind!r}")


def _parse_solver(d: dict) -> SolverOptions:
    defaults = SolverOptions()
    allowed = set(asdict(defaults))
    _check_keys(d, allowed, "solver")
    kw: dict[str, Any] = {}
    for key, value in d.items():
        path = f"solver.{key}"
        default = getattr(defaults, key)
        if key == "algorithm":
            kw[key] = str(value).lower()
        elif key == "warm_start":
            if not isinstance(value, bool):
                raise ScenarioError(path, "expected true or false")
            kw[key] = value
        elif key in ("qp_pgd_learning_rate", "lmo_learning_rate_final") and value is None:
            kw[key] = None
        elif isinstance(default, int) and not isinstance(default, bool):
            kw[key] = _int(value, path)
        else:
            kw[key] = _num(value, path)
    return SolverOptions(**kw)


def from_dict(raw: dict) -> ScenarioConfig:
    """Build and validate a config from its JSON data model."""
    if not isinstance(raw, dict):
        raise ScenarioError("", "scenario document must be a JSON object")
    _check_keys(raw, {"name", "description", "dynamics", "grid", "cost", "initial", "solver"}, "")
    grid_raw = _section(raw, "grid")
    _check_keys(grid_raw, {"T", "N_t"}, "grid")
    grid = TimeGrid(
        T=_num(_get(grid_raw, "T", "grid", required=True), "grid.T"),
        N_t=_int(_get(grid_raw, "N_t", "grid", default=150), "grid.N_t"),
    )
    cfg = ScenarioConfig(
        name=str(raw.get("name", "unnamed")),
        description=str(raw.get("description", "")),
        dynamics=_parse_dynamics(_section(raw, "dynamics")),
        grid=grid,
        cost=_parse_cost(_section(raw, "cost")),
        initial=_parse_initial(_section(raw, "initial")),
        solver=_parse_solver(_section(raw, "solver", required=False)),
    )
    return validate(cfg)


def to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`from_dict` (canonical form, all defaults explicit)."""
    c = cfg.cost
    terminal: dict[str, Any] = {"kind": c.terminal_kind, "weight": c.terminal_weight}
    if c.target is not None:
        terminal["target"] = list(c.target)
    if c.target_radius is not None:
        terminal["radius"] = c.target_radius
    dyn: dict[str, Any] = {"kind": cfg.dynamics.kind}
    if cfg.dynamics.kind == "single_integrator":
        dyn["dim"] = cfg.dynamics.dim
    else:
        dyn["grav_param"] = cfg.dynamics.grav_param
        dyn["control_bound"] = cfg.dynamics.control_bound
    init = cfg.initial
    if init.kind == "point_mass":
        initial: dict[str, Any] = {"kind": "point_mass", "state": list(init.states[0])}
    elif init.kind == "discrete":
        initial = {"kind": "discrete", "states": [list(s) for s in init.states],
                   "weights": list(init.weights)}
    else:
        initial = {"kind": "sampled", "density": dict(init.density or {}), "count": init.count}
        if init.seed is not None:
            initial["seed"] = init.seed
    return {
        "name": cfg.name,
        "description": cfg.description,
        "dynamics": dyn,
        "grid": {"T": cfg.grid.T, "N_t": cfg.grid.N_t},
        "cost": {
            "control_weight": c.control_weight,
            "control_form": c.control_form,
            "terminal": terminal,
            "obstacles": [{"center": list(o.center), "radius": o.radius, "margin": o.margin,
                           "gain": o.gain} for o in c.obstacles],
            "interaction_weight": c.interaction_weight,
            "kernel_width": c.kernel_width,
        },
        "initial": initial,
        "solver": asdict(cfg.solver),
    }


def dumps(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2)


def bundled_scenarios() -> dict[str, str]:
    """Map bundled scenario name -> one-line description, sorted by name."""
    out = {}
    for entry in sorted(resources.files("ommfc.scenarios").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            raw = json.loads(entry.read_text(encoding="utf-8"))
            out[entry.name[:-5]] = raw.get("description", "")
    return out


def resolve_scenario_path(name_or_path: str | Path) -> Path:
    """Accept a file path or the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    bundled = resources.files("ommfc.scenarios").joinpath(f"{name_or_path}.json")
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"scenario not found: {name_or_path}")


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario file (or bundled scenario name) into a validated config."""
    p = resolve_scenario_path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"malformed scenario file {p}: {exc}") from exc
    return from_dict(raw)


# --- validation --------------------------------------------------------------


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    dyn, grid, cost, init, opts = cfg.dynamics, cfg.grid, cfg.cost, cfg.initial, cfg.solver

    if grid.N_t < 1:
        raise ScenarioError("grid.N_t", "must be >= 1")
    if not (grid.T > 0 and math.isfinite(grid.T)):
        raise ScenarioError("grid.T", "must be positive and finite")

    if dyn.kind not in DYNAMICS_KINDS:
        raise ScenarioError("dynamics.kind", f"unknown dynamics kind {dyn.kind!r}")
    if dyn.kind == "single_integrator" and dyn.dim not in (2, 3):
        raise ScenarioError("dynamics.dim", "single integrator dimension must be 2 or 3")
    if dyn.kind == "keplerian":
        if not dyn.grav_param > 0:
            raise ScenarioError("dynamics.grav_param", "must be positive")
        if dyn.control_bound is None or not dyn.control_bound > 0:
            raise ScenarioError("dynamics.control_bound", "must be positive")

    pd = dyn.pos_dim
    if cost.control_weight < 0:
        raise ScenarioError("cost.control_weight", "must be nonnegative")
    if cost.terminal_weight < 0:
        raise ScenarioError("cost.terminal.weight", "must be nonnegative")
    if cost.interaction_weight < 0:
        raise ScenarioError("cost.interaction_weight", "must be nonnegative")
    if not cost.kernel_width > 0:
        raise ScenarioError("cost.kernel_width", "must be positive")
    if cost.terminal_kind == "quadratic":
        if cost.target is None:
            if cost.terminal_weight > 0:
                raise ScenarioError("cost.terminal.target", "missing required field")
        elif len(cost.target) != pd:
            raise ScenarioError("cost.terminal.target",
                                f"dimension mismatch: expected {pd}, got {len(cost.target)}")
    elif cost.target_radius is None or not cost.target_radius > 0:
        raise ScenarioError("cost.terminal.radius", "must be positive")
    for i, ob in enumerate(cost.obstacles):
        p = f"cost.obstacles[{i}]"
        if len(ob.center) != pd:
            raise ScenarioError(f"{p}.center", f"dimension mismatch: expected {pd}, got {len(ob.center)}")
        if not ob.radius > 0:
            raise ScenarioError(f"{p}.radius", "must be positive")
        if ob.gain < 0:
            raise ScenarioError(f"{p}.gain", "must be nonnegative")
        if ob.margin < 0:
            raise ScenarioError(f"{p}.margin", "must be nonnegative")

    if init.kind not in INITIAL_KINDS:
        raise ScenarioError("initial.kind", f"unknown initial distribution kind {init.kind!r}")
    if init.kind in ("point_mass", "discrete"):
        if len(init.weights) != len(init.states):
            raise ScenarioError("initial.weights", "one weight per state required")
        for i, s in enumerate(init.states):
            if len(s) != dyn.state_dim:
                raise ScenarioError(f"initial.states[{i}]",
                                    f"dimension mismatch: expected {dyn.state_dim}, got {len(s)}")
        if any(not w > 0 for w in init.weights):
            raise ScenarioError("initial.weights", "weights must be positive")
        if abs(math.fsum(init.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ScenarioError("initial.weights", f"weights sum to {math.fsum(init.weights)!r}, not 1")
    else:
        if init.count < 1:
            raise ScenarioError("initial.count", "must be >= 1")
        _check_density(init.density or {}, dyn.state_dim)

    if opts.algorithm not in ALGORITHMS:
        raise ScenarioError("solver.algorithm", f"expected one of {ALGORITHMS}")
    if opts.outer_iterations < 1:
        raise ScenarioError("solver.outer_iterations", "must be >= 1")
    if opts.lmo_steps < 1:
        raise ScenarioError("solver.lmo_steps", "must be >= 1")
    if not opts.lmo_learning_rate > 0:
        raise ScenarioError("solver.lmo_learning_rate", "must be positive")
    if opts.qp_pgd_learning_rate is not None and not opts.qp_pgd_learning_rate > 0:
        raise ScenarioError("solver.qp_pgd_learning_rate", "must be positive")
    if opts.lmo_restarts < 0:
        raise ScenarioError("solver.lmo_restarts", "must be >= 0")
    if not opts.lmo_restart_scale >= 0:
        raise ScenarioError("solver.lmo_restart_scale", "must be nonnegative")
    if opts.lmo_learning_rate_final is not None and not opts.lmo_learning_rate_final > 0:
        raise ScenarioError("solver.lmo_learning_rate_final", "must be positive")
    if opts.qp_pgd_steps < 0:
        raise ScenarioError("solver.qp_pgd_steps", "must be >= 0")
    for name in ("adam_beta1", "adam_beta2"):
        if not 0 <= getattr(opts, name) < 1:
            raise ScenarioError(f"solver.{name}", "must lie in [0, 1)")
    if not opts.adam_epsilon > 0:
        raise ScenarioError("solver.adam_epsilon", "must be positive")
    return cfg


def _check_density(density: dict, state_dim: int) -> None:
    kind = density.get("kind")
    if kind not in DENSITY_KINDS:
        raise ScenarioError("initial.density.kind", f"unsupported density descriptor {kind!r}")
    keys = ("low", "high") if kind == "uniform_box" else ("mean", "std")
    for key in keys:
        if key not in density:
            raise ScenarioError(f"initial.density.{key}", "missing required field")
        vec = _vec(density[key], f"initial.density.{key}")
        if len(vec) != state_dim:
            raise ScenarioError(f"initial.density.{key}",
                                f"dimension mismatch: expected {state_dim}, got {len(vec)}")


def sample_initial_states(dist: InitialDistribution, seed: int) -> list[tuple[np.ndarray, float]]:
    """Return the particle representation ``[(xi_m, pi_m)]`` of the initial distribution."""
    if dist.kind in ("point_mass", "discrete"):
        return [(np.array(s, dtype=float), float(w)) for s, w in zip(dist.states, dist.weights)]
    if dist.kind != "sampled":
        raise ScenarioError("initial.kind", f"unknown initial distribution kind {dist.kind!r}")
    density = dist.density or {}
    rng = np.random.default_rng(seed)
    m = dist.count
    if density.get("kind") == "uniform_box":
        low, high = np.asarray(density["low"], float), np.asarray(density["high"], float)
        pts = rng.uniform(low, high, size=(m, low.size))
    elif density.get("kind") == "gaussian":
        mean, std = np.asarray(density["mean"], float), np.asarray(density["std"], float)
        pts = mean + std * rng.standard_normal((m, mean.size))
    else:
        raise ScenarioError("initial.density.kind", f"unsupported density descriptor {density.get('kind')!r}")
    return [(pts[i].copy(), 1.0 / m) for i in range(m)]
