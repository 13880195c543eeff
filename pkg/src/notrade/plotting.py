"""Static figures for the CLI's ``--figure`` option (matplotlib, Agg backend)."""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_path(path, eta: float, filename: str) -> None:
    """Raw signal, smoothed signal with thresholds, and the position."""
    plt = _pyplot()
    t = np.arange(len(path))
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    top.plot(t, path.x, lw=0.6, color="0.6", label="signal")
    top.plot(t, path.x_smooth, lw=1.0, label="smoothed")
    for level in (eta, -eta):
        top.axhline(level, ls="--", lw=0.8, color="k")
    top.legend(loc="upper right")
    bottom.step(t, path.w, where="post")
    bottom.set_ylim(-1.5, 1.5)
    bottom.set_ylabel("position")
    bottom.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(filename)
    plt.close(fig)


def _grid_figure(alphas, etas, values, label: str, filename: str) -> None:
    plt = _pyplot()
    table = np.asarray(values, dtype=float).reshape(len(alphas), len(etas))
    fig, ax = plt.subplots(figsize=(6, 5))
    if len(alphas) > 1 and len(etas) > 1:
        cs = ax.contour(etas, alphas, table, levels=12)
        ax.clabel(cs, fontsize=7)
    else:
        ax.scatter(np.repeat(etas, len(alphas)), np.tile(alphas, len(etas)), c=table.T.ravel())
    ax.set_xlabel("eta")
    ax.set_ylabel("alpha")
    ax.set_title(label)
    fig.tight_layout()
    fig.savefig(filename)
    plt.close(fig)


def plot_contour(alphas, etas, H_values, filename: str) -> None:
    _grid_figure(alphas, etas, H_values, "expected survival time H", filename)


def plot_improvement(alphas, etas, R_values, filename: str) -> None:
    _grid_figure(alphas, etas, R_values, "improvement ratio R", filename)
