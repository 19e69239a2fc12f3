"""Plot metrics CSVs written by ``edocr-sim`` (needs matplotlib, not a package dependency).

usage: python scripts/plot_metrics.py out/metrics_edocr_seed1.csv out/metrics_max_residual_seed1.csv
"""

import csv
import sys

import matplotlib.pyplot as plt

COLUMNS = ("alive_fraction", "residual_fraction", "pdr", "drop_ratio", "throughput")


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ticks = [int(r["tick"]) for r in rows]
    series = {c: [float("nan") if r[c] == "NA" else float(r[c]) for r in rows] for c in COLUMNS}
    return ticks, series


def main(paths):
    fig, axes = plt.subplots(len(COLUMNS), 1, sharex=True, figsize=(7, 2.2 * len(COLUMNS)))
    for path in paths:
        ticks, series = load(path)
        for ax, col in zip(axes, COLUMNS):
            ax.plot(ticks, series[col], label=path.rsplit("/", 1)[-1])
            ax.set_ylabel(col)
    axes[-1].set_xlabel("tick")
    axes[0].legend(fontsize="small")
    fig.tight_layout()
    plt.show()


if __name__ == "__main__":
    main(sys.argv[1:])
