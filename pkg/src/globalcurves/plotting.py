"""Matplotlib figures written to files (Agg canvas, no global pyplot state)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    return path


def plot_branches(branches: Sequence[tuple[np.ndarray, np.ndarray]], path, xlabel: str = "", ylabel: str = "", title: str = "", folds=()) -> Path:
    """One line per branch; ``folds`` is an optional list of ``(x, y)`` markers."""
    fig = Figure(figsize=(6.4, 4.8))
    ax = fig.add_subplot()
    for i, (x, y) in enumerate(branches):
        ax.plot(x, y, lw=1.3, label=f"branch {i + 1}" if len(branches) > 1 else None)
    if len(folds):
        fx, fy = zip(*folds)
        ax.plot(fx, fy, "o", ms=4, mfc="none", color="k", label="fold")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    if len(branches) > 1 or len(folds):
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_profile(x, u, path, xlabel: str = "r", title: str = "") -> Path:
    fig = Figure(figsize=(6.4, 4.8))
    ax = fig.add_subplot()
    ax.plot(x, u, lw=1.3)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("u")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    return _save(fig, path)
