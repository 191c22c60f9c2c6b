"""Plot a fitted surface and its budget lines from ``rdalloc sweep --emit-surface`` output.

    rdalloc sweep -p fit.params --emit-surface surf.csv
    python3 scripts/plot_surface.py surf.csv -o surface.png

Needs matplotlib (``pip install -e .[plot]``).
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description="plot surface CSV")
    ap.add_argument("surface_csv")
    ap.add_argument("-o", "--output", default="surface.png")
    args = ap.parse_args()

    grid, lines = [], defaultdict(list)
    with open(args.surface_csv) as f:
        for row in csv.DictReader(f):
            pt = (float(row["R_1"]), float(row["R_2"]), float(row["D_t"]))
            if row["kind"] == "surface":
                grid.append(pt)
            else:
                lines[float(row["budget"])].append(pt)

    g = np.array(grid)
    k = int(round(np.sqrt(len(g))))
    r1, r2, d = (g[:, i].reshape(k, k) for i in range(3))

    fig = plt.figure(figsize=(11, 4.5))
    ax = fig.add_subplot(1, 2, 1, projection="3d")
    ax.plot_surface(r1, r2, d, cmap="viridis", alpha=0.8)
    ax.set_xlabel("R_1 (kbits)")
    ax.set_ylabel("R_2 (kbits)")
    ax.set_zlabel("D_t")

    ax2 = fig.add_subplot(1, 2, 2)
    for budget, pts in sorted(lines.items()):
        p = np.array(pts)
        ax2.plot(p[:, 0], p[:, 2], label=f"R_t = {budget:g}")
        best = p[np.argmin(p[:, 2])]
        ax2.plot(best[0], best[2], "o", color=ax2.lines[-1].get_color())
    ax2.set_xlabel("R_1 (kbits), R_2 = R_t - R_1")
    ax2.set_ylabel("D_t")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
