"""Figure rendering for reports: reconstructed geometry and residual summaries.

All figures are written to files through the Agg backend; nothing opens a
display.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_surface_figure(chart, positions: np.ndarray, path, title: str = ""):
    """Render a reconstructed position grid (n = 1 curve, n = 2 surface).

    Returns the path written, or None when the dimension has no renderer.
    """
    n = chart.n
    if n == 1:
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(positions[:, 0], positions[:, 1], "-", lw=1.2)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal", adjustable="datalim")
    elif n == 2:
        fig = plt.figure(figsize=(5.5, 4.5))
        ax = fig.add_subplot(111, projection="3d")
        X, Y, Z = positions[..., 0], positions[..., 1], positions[..., 2]
        ax.plot_surface(X, Y, Z, rstride=2, cstride=2, cmap="viridis",
                        linewidth=0.2, edgecolor="k", alpha=0.9)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_zlabel("x3")
    else:
        return None
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_residual_figure(stats: dict, path, title: str = "residuals"):
    """Log-scale bar chart of residual maxima against their tolerances.

    ``stats`` maps name -> {"max": float, "tolerance": float, ...}.
    """
    names = sorted(stats)
    maxima = [max(stats[k]["max"], 1e-18) for k in names]
    tols = [stats[k]["tolerance"] for k in names]
    colors = ["tab:green" if m < t else "tab:red" for m, t in zip(maxima, tols)]

    fig, ax = plt.subplots(figsize=(6, 0.5 * len(names) + 1.5))
    y = np.arange(len(names))
    ax.barh(y, maxima, color=colors, height=0.6)
    for yi, t in zip(y, tols):
        ax.plot([t, t], [yi - 0.4, yi + 0.4], "k--", lw=1)
    ax.set_xscale("log")
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.set_xlabel("max residual (dashed: tolerance)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_loop_figure(loop_points: np.ndarray, deviation: float, path):
    """Trace of a holonomy loop in the chart with the measured deviation."""
    pts = np.asarray(loop_points)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.plot(pts[:, 0], pts[:, 1], "-o", ms=3)
    ax.set_xlabel("u1")
    ax.set_ylabel("u2")
    ax.set_title(f"loop deviation {deviation:.3e}")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
