"""Scatter the weighted particle positions of every snapshot_t*.csv in a directory."""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("directory")
    ap.add_argument("--out", default="snapshots.png")
    args = ap.parse_args()
    files = sorted(Path(args.directory).glob("snapshot_t*.csv"), key=lambda p: int(p.stem[10:]))
    fig, ax = plt.subplots(figsize=(6, 5))
    for p in files:
        with p.open() as fh:
            rows = list(csv.DictReader(fh))
        x = [float(r["x0"]) for r in rows]
        y = [float(r["x1"]) for r in rows]
        w = [float(r["atom_weight"]) * float(r["source_weight"]) for r in rows]
        ax.scatter(x, y, s=[600 * v + 2 for v in w], alpha=0.5, label=p.stem[9:])
    ax.legend(fontsize=7)
    ax.set_aspect("equal")
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
