"""Render benchmark trace CSVs to figure files.

One panel per trace: recursive and true relative residuals, the measured
residual gap, and its running estimate on a log scale, with replacement
iterations marked. Output format follows the file suffix (.png, .pdf, .svg).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["load_trace", "render_compare_figure", "render_trace_figure"]


def load_trace(path: Union[str, Path]) -> np.ndarray:
    """Load one trace CSV as a structured array (nan for missing values)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.ndim == 0:
        data = data.reshape(1)
    return data


def _panel(ax, data, title):
    it = data["iter"]
    ax.semilogy(it, data["relres_rec"], color="tab:blue", lw=1.2, label="recursive relres")
    ax.semilogy(it, data["relres_true"], color="tab:red", lw=1.2, label="true relres")
    ax.semilogy(it, data["gap_true"], color="black", lw=1.0, label="gap (measured)")
    ax.semilogy(it, data["gap_est"], color="black", ls=":", lw=1.4, label="gap (estimate)")
    hits = data["replaced"] > 0
    if np.any(hits):
        ax.semilogy(it[hits], data["gap_true"][hits], "m^", ms=5, label="replacement")
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("iteration")
    ax.grid(True, which="major", alpha=0.3)


def render_trace_figure(
    trace_paths: Sequence[Union[str, Path]],
    out_path: Union[str, Path],
    title: str | None = None,
) -> Path:
    """Render one panel per trace CSV into a single figure file."""
    paths = [Path(p) for p in trace_paths]
    if not paths:
        raise ValueError("no trace files given")
    ncols = 1 if len(paths) == 1 else 2
    nrows = (len(paths) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.2 * ncols, 3.6 * nrows), squeeze=False)
    for ax in axes.flat[len(paths):]:
        ax.set_visible(False)
    for ax, path in zip(axes.flat, paths):
        _panel(ax, load_trace(path), path.stem)
    axes.flat[0].legend(fontsize=8, loc="best")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_compare_figure(
    trace_paths: Sequence[Union[str, Path]],
    out_path: Union[str, Path],
    title: str | None = None,
) -> Path:
    """Overlay the true relative residual of several traces in one panel."""
    paths = [Path(p) for p in trace_paths]
    if not paths:
        raise ValueError("no trace files given")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for path in paths:
        data = load_trace(path)
        ax.semilogy(data["iter"], data["relres_true"], lw=1.2, label=path.stem)
    ax.set_xlabel("iteration")
    ax.set_ylabel("true relative residual")
    ax.grid(True, which="major", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
