"""Matplotlib figure output for the summary-statistics path.

Three panels mirror the summary CSV: per-category dimension medians,
co-occurrence count vs association, and orientation placement fractions.
Kept separate from the report renderers, which stay plot-free.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .builder import OntologySummary


def save_batch_figure(rows: list[list[str]], out_dir: str | Path, stem: str = "scores") -> Path:
    """Grouped score bars for a batch-evaluate CSV (percent rows)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = [row[0] for row in rows]
    metrics = ("Sem", "Ori", "ProxOvlp", "TrueOvlp", "Avg")
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(ids)), 4.5))
    width = 0.8 / len(metrics)
    for k, metric in enumerate(metrics):
        values = [float(row[k + 1]) for row in rows]
        ax.bar([i + k * width for i in range(len(ids))], values, width=width, label=metric)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(ids))])
    ax.set_xticklabels(ids, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("score [%]")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    ax.set_title("Layout scores")
    path = out_dir / f"{stem}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_summary_figures(summary: OntologySummary, out_dir: str | Path, stem: str = "summary") -> list[Path]:
    """Write the three summary panels as PNGs; returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    dims = [c for c in summary.categories if "width_median" in c and "height_median" in c]
    fig, ax = plt.subplots(figsize=(7, 5))
    if dims:
        widths = [c["width_median"] for c in dims]
        heights = [c["height_median"] for c in dims]
        depths = [c.get("depth_median", 0.1) or 0.1 for c in dims]
        sizes = [60 + 400 * d for d in depths]
        ax.scatter(widths, heights, s=sizes, alpha=0.5, edgecolor="k")
        for c, x, y in zip(dims, widths, heights):
            ax.annotate(c["category"], (x, y), fontsize=7, ha="center", va="center")
    ax.set_xlabel("median width [m]")
    ax.set_ylabel("median height [m]")
    ax.set_title("Object dimensions (bubble size: depth)")
    path = out_dir / f"{stem}_dimensions.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 5))
    if summary.edges:
        counts = [e["count"] for e in summary.edges]
        npmis = [e["npmi"] for e in summary.edges]
        ax.scatter(counts, npmis, alpha=0.6, edgecolor="k")
        ax.axhline(0.0, color="gray", linewidth=0.8, linestyle="--")
    positive = summary.npmi_positive_fraction
    subtitle = "" if positive is None else f" ({positive:.1%} of {summary.edge_count} edges positive)"
    ax.set_xlabel("co-occurrence count [scenes]")
    ax.set_ylabel("association (nPMI)")
    ax.set_title("Co-occurrence vs association" + subtitle)
    path = out_dir / f"{stem}_cooccurrence.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    orient = [
        c for c in summary.categories
        if "back_to_wall_fraction" in c and "faces_center_fraction" in c
    ]
    fig, ax = plt.subplots(figsize=(7, 5))
    if orient:
        xs = [c["back_to_wall_fraction"] for c in orient]
        ys = [c["faces_center_fraction"] for c in orient]
        ax.scatter(xs, ys, alpha=0.6, edgecolor="k")
        for c, x, y in zip(orient, xs, ys):
            ax.annotate(c["category"], (x, y), fontsize=7, ha="left", va="bottom")
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("back-to-wall fraction")
    ax.set_ylabel("faces-center fraction")
    ax.set_title("Placement strategies")
    path = out_dir / f"{stem}_orientation.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    return written
