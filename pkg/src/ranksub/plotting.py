"""Figure rendering for the CLI report path.

matplotlib is imported lazily with the Agg backend so library use never
touches a display; every function writes a file next to the delimited
output and returns its path.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def save_grid_bubbles(grid, path: str | Path, title: str | None = None) -> Path:
    """2-D rank grid as circles with area proportional to cell weight."""
    if grid.d != 2:
        raise ValueError(f"bubble plot needs d = 2, got d = {grid.d}")
    plt = _pyplot()
    w = grid.weights_dense()
    r1, r2 = np.nonzero(w)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(r1 + 1, r2 + 1, s=4000.0 * w[r1, r2], alpha=0.6, edgecolors="k")
    ax.set_xlim(0.5, grid.m + 0.5)
    ax.set_ylim(0.5, grid.m + 0.5)
    ax.set_xlabel("rank in $x_1$")
    ax.set_ylabel("rank in $x_2$")
    ax.set_title(title or f"rank grid (m={grid.m})")
    path = Path(path)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path


def save_scatter(values: np.ndarray, path: str | Path, title: str | None = None) -> Path:
    """Scatter of the first two data coordinates."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(values[:, 0], values[:, 1], s=12, alpha=0.8)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    if title:
        ax.set_title(title)
    path = Path(path)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path


def save_slice_heatmap(
    xs: np.ndarray, ys: np.ndarray, field: np.ndarray, path: str | Path, title: str | None = None
) -> Path:
    """Conditional-slice density field as a filled contour map."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 5))
    mesh = ax.contourf(xs, ys, np.asarray(field).T, levels=30)
    fig.colorbar(mesh, ax=ax, label="conditional density")
    ax.set_xlabel("free coordinate 1")
    ax.set_ylabel("free coordinate 2")
    if title:
        ax.set_title(title)
    path = Path(path)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path


def save_cell_histograms(
    values_by_cell: dict[str, np.ndarray], path: str | Path, title: str | None = None
) -> Path:
    """Replication histograms of cell estimates, one panel per tracked cell."""
    plt = _pyplot()
    cells = list(values_by_cell)
    fig, axes = plt.subplots(1, len(cells), figsize=(4.5 * len(cells), 3.5), squeeze=False)
    for ax, cell in zip(axes[0], cells):
        ax.hist(values_by_cell[cell], bins=30, density=True, alpha=0.8)
        ax.set_title(f"cell {cell}")
        ax.set_xlabel(r"$\hat{P}_n$")
    if title:
        fig.suptitle(title)
    path = Path(path)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path
