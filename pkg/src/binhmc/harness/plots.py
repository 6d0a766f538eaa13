"""Line charts rendered from the CSV artifacts (never from in-memory chains)."""
from __future__ import annotations

import csv
from pathlib import Path


def _read_columns(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: [r[k] for r in rows] for k in rows[0]}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_trace(csv_path, svg_path, column: str) -> Path:
    """``column`` against ``iter`` as an SVG line chart."""
    plt = _pyplot()
    cols = _read_columns(csv_path)
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot([int(v) for v in cols.get("iter", [])], [float(v) for v in cols.get(column, [])], lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel(column)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return Path(svg_path)


def plot_sweep(csv_path, svg_path, column: str = "median_min_ess_per_cost") -> Path:
    """One line per sampler of ``column`` against n."""
    plt = _pyplot()
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in dict.fromkeys(r["sampler"] for r in rows):
        sub = [r for r in rows if r["sampler"] == name]
        ax.plot([int(r["n"]) for r in sub], [float(r[column]) for r in sub], marker="o", label=name)
    ax.set_xlabel("n")
    ax.set_ylabel(column)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return Path(svg_path)
