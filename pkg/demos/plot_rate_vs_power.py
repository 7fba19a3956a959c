"""Optional plot helper: render power_sweep.csv as rate-vs-power curves.

Generate the CSV first, then point this script at it:

    python3 -m d3s.cli --mode casestudy-short --seed 7 \
        --power-sweep 0.25,0.5,1,2 --out sweep_out
    python3 demos/plot_rate_vs_power.py sweep_out/power_sweep.csv

Needs matplotlib; the CSV itself is the deliverable, the figure is sugar.
"""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(path: str, out: str = "rate_vs_power.png") -> None:
    series = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            series[row["ue_id"]].append((float(row["max_power_w"]), float(row["rate_bps"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for ue, pts in sorted(series.items()):
        pts.sort()
        xs = [p for p, _ in pts]
        ys = [r / 1e6 for _, r in pts]
        if ue == "min":
            ax.plot(xs, ys, "k-o", linewidth=2, label="minimum UE")
        else:
            ax.plot(xs, ys, alpha=0.35)
    ax.set_xlabel("per-drone power budget (W)")
    ax.set_ylabel("achievable downlink rate (Mb/s)")
    ax.set_title("rate levels off as the budget grows")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    main(*sys.argv[1:3])
