"""Figure rendering for the analysis and landscape reports (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .landscape import LandscapeGrid  # noqa: E402

LEARNER_COLORS = {"bo": "tab:blue", "nipes": "tab:red", "revde": "tab:green"}


def plot_curves(robot: str, curves: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]], path) -> Path:
    """Mean best-so-far speed per learner with its 95% band."""
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for learner, (mean, lo, hi) in curves.items():
        evals = np.arange(1, len(mean) + 1)
        color = LEARNER_COLORS.get(learner)
        ax.plot(evals, mean, color=color, label=learner, lw=1.4)
        ax.fill_between(evals, lo, hi, color=color, alpha=0.25, lw=0)
    ax.set_title(robot)
    ax.set_xlabel("evaluations")
    ax.set_ylabel("speed (cm/s)")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_landscape(grid: LandscapeGrid, path, title: str = "", levels: int = 12) -> Path:
    """Contour map; ``.svg`` paths give monochrome level sets, anything else a filled plot."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    lo, hi = grid.bounds
    if path.suffix == ".svg":
        if hi > lo:
            cs = ax.contour(grid.xs, grid.ys, grid.values, levels=levels, colors="k", linewidths=0.7)
            ax.clabel(cs, fontsize=6, fmt="%.2f")
    else:
        if hi > lo:
            cf = ax.contourf(grid.xs, grid.ys, grid.values, levels=levels, cmap="viridis")
            fig.colorbar(cf, ax=ax, label="MBF (cm/s)")
        else:
            ax.imshow(grid.values, extent=(0, 1, 0, 1), origin="lower", cmap="viridis")
    ax.scatter([p.x for p in grid.points], [p.y for p in grid.points], s=10, c="k", marker="o")
    for p in grid.points:
        ax.annotate(p.label, (p.x, p.y), fontsize=6, xytext=(2, 2), textcoords="offset points")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel(grid.axes[0])
    ax.set_ylabel(grid.axes[1])
    ax.set_title(f"{title}  [{lo:.2f}, {hi:.2f}]" if title else f"[{lo:.2f}, {hi:.2f}]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
