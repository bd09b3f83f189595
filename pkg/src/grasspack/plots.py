"""Report figures rendered next to the delimited output.

Uses the Agg backend so the CLI works headless; every function writes a
PNG and returns its path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import KernelStats

_BINS = 24


def _hist(ax, values, **kwargs):
    # A spread below bin resolution (e.g. identical norms) breaks numpy's
    # edge construction; widen the range instead.
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    if span < 1e-9 * max(1.0, abs(hi)):
        pad = max(0.5, abs(hi) * 0.1)
        kwargs["range"] = (lo - pad, hi + pad)
    ax.hist(values, bins=_BINS, color="#4878a8", edgecolor="black", **kwargs)


def save_distance_histogram(
    spectrum: np.ndarray,
    min_distance: float,
    bound: float,
    path,
    title: str = "pairwise distance spectrum",
) -> Path:
    """Histogram of all pairwise distances with the achieved minimum and bound."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    _hist(ax, spectrum)
    ax.axvline(min_distance, color="#c44e52", linestyle="--", label=f"min {min_distance:.4f}")
    ax.axvline(bound, color="#55a868", linestyle=":", label=f"bound {bound:.4f}")
    ax.set_xlabel("distance")
    ax.set_ylabel("pair count")
    ax.set_title(title)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_kernel_stats_panels(
    stats: KernelStats,
    path,
    title: str = "kernel statistics",
) -> Path:
    """Three-panel distribution of per-kernel mean, variance, and norm."""
    path = Path(path)
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4))
    panels = [
        ("mean", stats.per_kernel_mean),
        ("variance", stats.per_kernel_variance),
        ("norm", stats.per_kernel_norm),
    ]
    for ax, (name, values) in zip(axes, panels):
        _hist(ax, values)
        ax.set_xlabel(name)
        ax.set_ylabel("kernel count")
    axes[2].axvline(stats.threshold, color="#c44e52", linestyle="--", label="sparsity cutoff")
    axes[2].legend(loc="upper left", fontsize=8)
    fig.suptitle(f"{title} ({stats.n} kernels, {stats.sparse_count} sparse)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
