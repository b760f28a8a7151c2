"""Log-log plot of a ``compact-splitting converge`` CSV with an h^4 guide.

    python3 scripts/plot_convergence.py converge.csv -o convergence.png
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    series = defaultdict(list)
    for row in csv.DictReader(lines):
        series[float(row["tau"])].append((float(row["h"]), float(row["error_l2"])))
    return {tau: sorted(pts) for tau, pts in series.items()}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="convergence.png")
    args = ap.parse_args(argv)

    series = read_rows(args.csv)
    fig, ax = plt.subplots(figsize=(5, 4))
    for tau, pts in series.items():
        hs, errs = zip(*pts)
        ax.loglog(hs, errs, "o-", label=f"tau = {tau:.4g}")
    hs_all = sorted({h for pts in series.values() for h, _ in pts})
    if hs_all:
        anchor = max(e for pts in series.values() for _, e in pts)
        ax.loglog(hs_all, [anchor * (h / hs_all[-1]) ** 4 for h in hs_all], "k--", label="h^4")
    ax.set_xlabel("h")
    ax.set_ylabel("L2 error at T")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(args.out)


if __name__ == "__main__":
    main()
