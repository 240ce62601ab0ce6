"""Sensitivity of the final objective and the gap slope to the oracle settings.

Each positional argument is a JSON object of solver overrides, e.g.
    python scripts/lmo_sweep.py uav2d_single '{"lmo_restarts": 0}' '{"lmo_restarts": 2}'
"""
import argparse
import json
import time

from ommfc import load_scenario, run
from ommfc.diagnostics import loglog_fit
from ommfc.measure import objective_breakdown


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("scenario")
    ap.add_argument("overrides", nargs="*", default=["{}"])
    ap.add_argument("--iters", type=int, default=None)
    args = ap.parse_args()
    for text in args.overrides:
        kw = json.loads(text)
        if args.iters:
            kw["outer_iterations"] = args.iters
        cfg = load_scenario(args.scenario).with_solver(**kw)
        t0 = time.perf_counter()
        res = run(cfg)
        secs = time.perf_counter() - t0
        bd = objective_breakdown(res.mixture, res.gram, cfg.cost)
        K = len(res.records) - 1
        try:
            slope = f"{loglog_fit(res, 10, min(90, K - 1)).slope:.2f}"
        except ValueError:
            slope = "n/a"
        print(f"{text:50s} J={bd['total']:.6f} slope={slope} "
              f"active={(res.mixture.weights > 0).sum()} {secs:.0f}s", flush=True)


if __name__ == "__main__":
    main()
