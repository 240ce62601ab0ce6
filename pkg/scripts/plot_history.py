"""Plot objective and displayed gap from a history.csv (needs matplotlib)."""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ommfc.diagnostics import read_history


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("history")
    ap.add_argument("--out", default="history.png")
    args = ap.parse_args()
    h = read_history(args.history)
    k, J, gap = h["iter"], h["objective"], h["gap_displayed"]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.semilogy(k, J)
    a1.set_xlabel("k")
    a1.set_ylabel("J_k")
    m = (k > 0) & (gap > 0)
    a2.loglog(k[m], gap[m], label="J_k - J_K")
    a2.loglog(k[m], gap[m][0] * k[m][0] / k[m], "--", label="1/k")
    a2.set_xlabel("k")
    a2.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
