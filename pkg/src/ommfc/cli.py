"""ommfc command line: run scenarios, verify the numerics, list bundled scenarios."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import diagnostics
from .scenario import ScenarioError, bundled_scenarios, load_scenario, validate
from .solver import SolverError, fcfw_run, fw_run

EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 1, 2, 3
OUT_ENV = "OMMFC_OUT"
SUITES = ("gradients", "psd", "oracle", "orbit")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with the solver code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_snapshot_times(text: str, N_t: int) -> list[int]:
    """Comma-separated entries; integers are grid indices, decimals are fractions of T."""
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        if any(ch in tok for ch in ".eE"):
            f = float(tok)
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"fraction {tok} outside [0, 1]")
            n = int(round(f * N_t))
        else:
            n = int(tok)
        if not 0 <= n <= N_t:
            raise ValueError(f"snapshot index {n} outside [0, {N_t}]")
        if n not in out:
            out.append(n)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ommfc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="solve a scenario and write history and snapshots")
    r.add_argument("--scenario", required=True, help="bundled name or path to a JSON file")
    r.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")
    r.add_argument("--algorithm", choices=("fw", "fcfw"), default=None, help="default fcfw")
    r.add_argument("--iters", type=int, default=None, help="outer iterations K")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--snapshot-times", default="0,0.25,0.5,0.75,1.0")
    r.add_argument("--threads", type=int, default=None, help="LMO workers (default all cores)")
    r.add_argument("--no-timing", action="store_true", help="write 0 for lmo_seconds")

    v = sub.add_parser("verify", help="run the numerical property suites")
    v.add_argument("--suite", choices=SUITES, action="append", help="repeatable; default all")
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)

    sub.add_parser("list-scenarios", help="print bundled scenarios")
    return p


def _err(msg: str) -> None:
    print(f"ommfc: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.scenario)
        changes = {"algorithm": args.algorithm or "fcfw"}
        if args.iters is not None:
            changes["outer_iterations"] = args.iters
        if args.seed is not None:
            changes["rng_seed"] = args.seed
        cfg = cfg.with_solver(**changes)
        validate(cfg)
        times = parse_snapshot_times(args.snapshot_times, cfg.grid.N_t)
        if args.threads is not None and args.threads < 1:
            raise ValueError("--threads must be >= 1")
    except FileNotFoundError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (ScenarioError, ValueError) as exc:
        _err(f"invalid configuration: {exc}")
        return EXIT_CONFIG

    out = Path(args.out or os.environ.get(OUT_ENV) or "results")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _err(f"cannot create output directory {out}: {exc}")
        return EXIT_IO

    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    solve = fcfw_run if cfg.solver.algorithm == "fcfw" else fw_run
    try:
        result = solve(cfg, threads=threads)
    except SolverError as exc:
        _err(f"solver failed: {exc}")
        return EXIT_SOLVER

    try:
        diagnostics.write_history(result, out / "history.csv", timing=not args.no_timing)
        diagnostics.write_snapshots(result, times, out)
    except OSError as exc:
        _err(f"write failed: {exc}")
        return EXIT_IO
    print(f"{cfg.name}: {cfg.solver.algorithm} K={len(result.records) - 1} "
          f"J={result.records[-1].objective:.10g} -> {out}")
    return 0


def cmd_verify(args) -> int:
    suites = args.suite or list(SUITES)
    ok_all = True
    for name in suites:
        try:
            ok, detail = _SUITE_RUNNERS[name](args)
        except Exception as exc:  # a crashing suite counts as a failure
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        print(f"{name:10s} {'PASS' if ok else 'FAIL'}  {detail}")
        ok_all &= ok
    return 0 if ok_all else EXIT_SOLVER


def _suite_gradients(args):
    parts, ok = [], True
    for scen in ("uav2d_single", "sat_constellation"):
        rep = diagnostics.audit_gradients(load_scenario(scen), args.trials, args.seed)
        parts.append(f"{rep.family}: rel={rep.max_rel_error:.2e} zero={rep.max_zero_abs_error:.1e}")
        ok &= rep.passed
    return ok, "; ".join(parts)


def _suite_psd(args):
    cfg = load_scenario("uav2d_multisource").with_solver(lmo_steps=60, rng_seed=args.seed)
    lo, ok = diagnostics.psd_smoke(cfg, iterations=4)
    return ok, f"min eig {lo:.3e}"


def _suite_oracle(args):
    rep = diagnostics.oracle_equivalence(50, args.seed)
    return rep.passed, f"objective rel={rep.max_objective_rel_error:.2e} gram abs={rep.max_gram_abs_error:.1e}"


def _suite_orbit(args):
    rep = diagnostics.orbit_conservation()
    return rep.passed, f"radius err={rep.max_radius_error:.2e} km energy drift={rep.energy_drift:.2e}"


_SUITE_RUNNERS = {"gradients": _suite_gradients, "psd": _suite_psd,
                  "oracle": _suite_oracle, "orbit": _suite_orbit}


def cmd_list(args) -> int:
    for name, desc in bundled_scenarios().items():
        print(f"{name}\t{desc}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "verify": cmd_verify, "list-scenarios": cmd_list}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
