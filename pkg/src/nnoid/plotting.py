"""Matplotlib figures written next to a run report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .surface import Mesh  # noqa: E402


def _save(fig, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=110, metadata={"Software": None, "Creator": None})
    plt.close(fig)
    return str(path)


def plot_mesh(mesh: Mesh, path, title: str = "") -> str:
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    if len(mesh.faces):
        v = mesh.vertices
        ax.plot_trisurf(v[:, 0], v[:, 1], v[:, 2], triangles=mesh.faces, cmap="viridis",
                        linewidth=0.1, edgecolor="k", alpha=0.9)
        lo, hi = v.min(axis=0), v.max(axis=0)
        c, r = (lo + hi) / 2, float(np.max(hi - lo)) / 2
        ax.set_xlim(c[0] - r, c[0] + r)
        ax.set_ylim(c[1] - r, c[1] + r)
        ax.set_zlim(c[2] - r, c[2] + r)
    ax.set_title(title)
    return _save(fig, path)


def plot_traces(theta: np.ndarray, traces: dict, predicted: dict, path) -> str:
    """Monodromy half-traces against the closed-form exponent, over ``theta``."""
    fig, ax = plt.subplots(figsize=(7, 4))
    order = np.argsort(theta)
    for name, tr in traces.items():
        line, = ax.plot(theta[order], np.real(tr)[order] / 2, label=f"M_{name}")
        ax.plot(theta[order], np.real(predicted[name])[order] / 2, "--", color=line.get_color(), lw=0.8)
    ax.set_xlabel("theta")
    ax.set_ylabel("trace / 2")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_dressing(theta: np.ndarray, H: np.ndarray, path) -> str:
    """Entries of the invariant Hermitian form along the unit circle."""
    fig, ax = plt.subplots(figsize=(7, 4))
    order = np.argsort(theta)
    ax.plot(theta[order], H[order, 0, 0].real, label="H11")
    ax.plot(theta[order], H[order, 1, 1].real, label="H22")
    ax.plot(theta[order], np.abs(H[order, 0, 1]), label="|H12|")
    ax.set_xlabel("theta")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_residuals(values: dict, path, title: str = "") -> str:
    """Log-scale bar chart of named residuals."""
    names = list(values)
    vals = np.array([max(float(values[k]), 1e-300) for k in names])
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(names) + 2), 4))
    ax.bar(range(len(names)), vals)
    ax.set_yscale("log")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
