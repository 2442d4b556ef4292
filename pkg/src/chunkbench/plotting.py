"""Static SVG renderings of benchmark results."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "chunkbench",
    "svg.fonttype": "path",
    "font.size": 8,
    "axes.titlesize": 9,
    "axes.labelsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "legend.fontsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}


def _save(fig: plt.Figure, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def tradeoff_scatter(
    path: Path,
    labels: Sequence[str],
    effectiveness: Sequence[float],
    cost: Sequence[float],
    frontier: Sequence[str],
    *,
    cost_label: str,
    title: str,
    log_cost: bool = True,
) -> Path:
    """Effectiveness against cost with the Pareto frontier drawn as a step line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        on_front = set(frontier)
        colors = ["tab:red" if lab in on_front else "tab:gray" for lab in labels]
        ax.scatter(cost, effectiveness, c=colors, s=18, zorder=3)
        for lab, x, y in zip(labels, cost, effectiveness):
            ax.annotate(lab, (x, y), xytext=(3, 2), textcoords="offset points", fontsize=6)
        pos = {lab: (x, y) for lab, x, y in zip(labels, cost, effectiveness)}
        if len(frontier) > 1:
            xs, ys = zip(*(pos[lab] for lab in frontier))
            ax.step(xs, ys, where="post", color="tab:red", lw=1.0, zorder=2)
        if log_cost and min(cost, default=0) > 0:
            ax.set_xscale("log")
        ax.set_xlabel(cost_label)
        ax.set_ylabel("mean nDCG@5")
        ax.set_title(title)
        return _save(fig, path)


def ndcg_boxplot(path: Path, labels: Sequence[str], per_query: Sequence[Sequence[float]], means: Sequence[float], *, title: str) -> Path:
    """Per-query nDCG@5 distributions, one box per strategy, with means as diamonds."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6.0, 0.22 * len(labels)), 3.6))
        positions = np.arange(1, len(labels) + 1)
        ax.boxplot(per_query, positions=positions, widths=0.6, showfliers=False)
        ax.scatter(positions, means, marker="D", color="tab:red", s=10, zorder=3)
        ax.set_xticks(positions)
        ax.set_xticklabels(labels, rotation=90)
        ax.set_ylim(-0.02, 1.02)
        ax.set_ylabel("nDCG@5")
        ax.set_title(title)
        return _save(fig, path)


def correlation_heatmap(path: Path, names: Sequence[str], matrix: np.ndarray) -> Path:
    """Pearson matrix; undefined cells (NaN) are left blank."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(0.45 * len(names) + 2, 0.45 * len(names) + 1.5))
        im = ax.imshow(np.ma.masked_invalid(matrix), vmin=-1, vmax=1, cmap="coolwarm")
        ax.set_xticks(range(len(names)))
        ax.set_yticks(range(len(names)))
        ax.set_xticklabels(names, rotation=90)
        ax.set_yticklabels(names)
        for i in range(len(names)):
            for j in range(len(names)):
                if np.isfinite(matrix[i, j]):
                    ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center", fontsize=5)
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        return _save(fig, path)
