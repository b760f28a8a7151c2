"""Plot sampled kernels written by ``compact-splitting kernels``.

    python3 scripts/plot_kernels.py kernels_samples.csv -o kernels.png
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="kernels.png")
    args = ap.parse_args(argv)

    curves = defaultdict(lambda: defaultdict(list))
    with open(args.csv, newline="") as fh:
        for row in csv.DictReader(ln for ln in fh if ln.strip() and not ln.startswith("#")):
            curves[row["kernel"]][float(row["tau"])].append((float(row["s"]), float(row["value"])))

    fig, axes = plt.subplots(1, len(curves), figsize=(4 * len(curves), 3.5), squeeze=False)
    for ax, (name, by_tau) in zip(axes[0], curves.items()):
        for tau, pts in sorted(by_tau.items()):
            s, v = zip(*sorted(pts))
            ax.plot(s, v, label=f"tau = {tau:.4g}")
        ax.axhline(0.0, color="0.6", lw=0.5)
        ax.set_title(name)
        ax.set_xlabel("s")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(args.out)


if __name__ == "__main__":
    main()
