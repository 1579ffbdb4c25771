"""Figure generation from run directories.

Everything is file-based: learning curves come from metrics CSVs,
success bars from a grid table. Figures are written as SVG (or whatever
the output suffix selects).
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .persist import read_metrics  # noqa: E402


class EmptyMetricsError(ValueError):
    """A metrics file contained a header but no rows."""


def _load_column(path, column: str) -> np.ndarray:
    data = read_metrics(path)
    if column not in data:
        raise KeyError(f"{path}: no column {column}")
    if data[column].size == 0:
        raise EmptyMetricsError(f"{path}: no data rows")
    return data[column]


def plot_learning_curves(
    runs: dict[str, list], out_path, column: str = "final_distance_m"
) -> dict[str, dict[str, np.ndarray]]:
    """One curve per label, a min/max band when a label has several runs.

    `runs` maps a legend label to a list of metrics.csv paths; curves
    are aligned on episode index and truncated to the shortest run.
    Returns the plotted series per label (mean/lo/hi arrays).
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plotted: dict[str, dict[str, np.ndarray]] = {}
    for label, paths in runs.items():
        if not paths:
            raise ValueError(f"label {label!r} has no metrics files")
        series = [_load_column(p, column) for p in paths]
        n = min(s.size for s in series)
        ys = np.stack([s[:n] for s in series])
        x = np.arange(n)
        mean, lo, hi = ys.mean(axis=0), ys.min(axis=0), ys.max(axis=0)
        plotted[label] = {"mean": mean, "lo": lo, "hi": hi}
        (line,) = ax.plot(x, mean, label=label)
        if ys.shape[0] > 1:
            ax.fill_between(
                x, lo, hi, alpha=0.2, color=line.get_color(), linewidth=0,
            )
    ax.set_xlabel("episode")
    ax.set_ylabel(column.replace("_", " "))
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return plotted


def plot_success_bars(rates: dict[str, float], out_path) -> None:
    if not rates:
        raise ValueError("nothing to plot")
    labels = list(rates)
    values = [rates[k] for k in labels]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(labels)), 4.0))
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("success rate")
    ax.set_ylim(0.0, 1.0)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def success_bars_from_table(table_csv, out_path) -> dict[str, float]:
    """Bar chart straight from a grid table.csv; returns the rates."""
    rates: dict[str, float] = {}
    with open(table_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("error"):
                continue
            rates[row["cell"]] = float(row["success_rate"])
    if not rates:
        raise EmptyMetricsError(f"{table_csv}: no successful cells")
    plot_success_bars(rates, out_path)
    return rates
