"""Plot E3 (low-rank recovery phase transition in p_v) from e3_summary.csv.

Needs matplotlib, which blindcs itself does not depend on.
Usage: python plot_e3.py  (writes e3.png next to this script)
"""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "e3_summary.csv", newline="") as fh:
    fh.readline()  # schema line
    rows = list(csv.DictReader(fh))

x_col, y_cols, loglog = 'p_v', ['rate'], False
fig, ax = plt.subplots(figsize=(5, 3.5))
xs = [float(r[x_col]) for r in rows]
for y in y_cols:
    ys = [float(r[y]) if r[y] else float("nan") for r in rows]
    if len(rows) == 1:
        ax.bar([y], ys)
    else:
        ax.plot(xs, ys, marker="o", label=y)
if len(rows) > 1:
    ax.set_xlabel(x_col)
    ax.legend()
if loglog:
    ax.set_xscale("log")
    ax.set_yscale("log")
ax.set_title("E3: low-rank recovery phase transition in p_v")
fig.tight_layout()
fig.savefig(here / "e3.png", dpi=150)
