"""Paired FW / FCFW runs on one scenario; prints both objective histories side by side."""
import argparse

import numpy as np

from ommfc import fcfw_run, fw_run, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="uav2d_single")
    ap.add_argument("--iters", type=int, default=30)
    ap.add_argument("--every", type=int, default=5)
    args = ap.parse_args()
    cfg = load_scenario(args.scenario).with_solver(outer_iterations=args.iters)
    a, b = fw_run(cfg).objectives, fcfw_run(cfg).objectives
    print(f"{'k':>4} {'FW':>14} {'FCFW':>14}")
    for k in np.r_[np.arange(0, args.iters, args.every), args.iters]:
        print(f"{k:4d} {a[k]:14.8g} {b[k]:14.8g}")


if __name__ == "__main__":
    main()
