"""Run every bundled scenario and write history/snapshots under results/<name>/."""
import argparse
import time
from pathlib import Path

from ommfc import load_scenario, run
from ommfc.diagnostics import loglog_fit, write_history, write_snapshots
from ommfc.measure import objective_breakdown
from ommfc.scenario import bundled_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="*", default=None)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    for name in args.only or bundled_scenarios():
        cfg = load_scenario(name)
        t0 = time.perf_counter()
        res = run(cfg, threads=args.threads)
        secs = time.perf_counter() - t0
        out = Path(args.out) / name
        out.mkdir(parents=True, exist_ok=True)
        write_history(res, out / "history.csv")
        N = cfg.grid.N_t
        write_snapshots(res, sorted({0, N // 5, 2 * N // 5, 3 * N // 5, 4 * N // 5, N}), out)
        bd = objective_breakdown(res.mixture, res.gram, cfg.cost)
        try:
            slope = f"{loglog_fit(res, 10, min(90, len(res.records) - 2)).slope:.2f}"
        except ValueError:
            slope = "n/a"
        print(f"{name:20s} K={len(res.records) - 1:3d} J={bd['total']:.6g} "
              f"obstacle={bd['obstacle'] / bd['total']:.2e} slope={slope} {secs:.0f}s")


if __name__ == "__main__":
    main()
