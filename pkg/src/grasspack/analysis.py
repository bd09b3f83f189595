"""Sparsity and diversity diagnostics over kernel tensors and codebooks."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .codebook_io import KernelTensor
from .errors import EmptyTensor, InvalidProblem, ShapeMismatch
from .geometry import Metric, pairwise_distances
from .packing import Codebook

# A kernel counts as sparse ("dying") when its Frobenius norm is at or
# below the threshold. The default threshold is relative, 1e-2 times the
# median kernel norm, so it survives any global rescaling.
DEFAULT_RELATIVE_THRESHOLD = 1e-2


@dataclass(frozen=True)
class SparsityConfig:
    """Sparsity cutoff; ``None`` means 1e-2 times the median kernel norm."""

    norm_threshold: float | None = None

    def __post_init__(self):
        if self.norm_threshold is not None and self.norm_threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.norm_threshold}")

    def resolve(self, norms: np.ndarray) -> float:
        if self.norm_threshold is not None:
            return float(self.norm_threshold)
        return DEFAULT_RELATIVE_THRESHOLD * float(np.median(norms))


def _five_number(values: np.ndarray) -> dict[str, float]:
    return {
        "min": float(np.min(values)),
        "max": float(np.max(values)),
        "mean": float(np.mean(values)),
        "std": float(np.std(values)),
    }


@dataclass(frozen=True)
class KernelStats:
    """Per-kernel mean, population variance, and Frobenius norm.

    ``summary`` maps each quantity name to its min/max/mean/std across
    the kernel axis; ``sparse_count`` counts kernels whose norm sits at
    or below ``threshold``.
    """

    per_kernel_mean: np.ndarray = field(repr=False)
    per_kernel_variance: np.ndarray = field(repr=False)
    per_kernel_norm: np.ndarray = field(repr=False)
    sparse_count: int
    threshold: float
    summary: dict[str, dict[str, float]]

    @property
    def n(self) -> int:
        return len(self.per_kernel_norm)


def compute_stats(tensor: KernelTensor, config: SparsityConfig = SparsityConfig()) -> KernelStats:
    """Statistics per output channel over all of its in x h x w values.

    Raises
    ------
    EmptyTensor
        If the tensor holds no kernels or no values.
    """
    values = tensor.values
    if values.size == 0:
        raise EmptyTensor("kernel tensor holds no values")
    n = values.shape[0]
    flat = values.reshape(n, -1)
    means = flat.mean(axis=1)
    variances = flat.var(axis=1)  # population convention (divide by n)
    norms = np.linalg.norm(flat, axis=1)
    threshold = config.resolve(norms)
    sparse_count = int(np.sum(norms <= threshold))
    return KernelStats(
        per_kernel_mean=means,
        per_kernel_variance=variances,
        per_kernel_norm=norms,
        sparse_count=sparse_count,
        threshold=threshold,
        summary={
            "mean": _five_number(means),
            "variance": _five_number(variances),
            "norm": _five_number(norms),
        },
    )


def distance_spectrum(codebook: Codebook, metric: Metric) -> np.ndarray:
    """All N(N-1)/2 pairwise distances, sorted ascending.

    The first element equals the codebook's minimum distance when the
    metric matches the codebook's own.

    Raises
    ------
    InvalidProblem
        If the codebook holds fewer than two subspaces.
    """
    if len(codebook.subspaces) < 2:
        raise InvalidProblem("distance spectrum needs at least two subspaces")
    matrix = pairwise_distances(codebook.subspaces, metric)
    return np.sort(matrix[np.triu_indices(matrix.shape[0], k=1)])


@dataclass(frozen=True)
class StatsComparison:
    """Signed per-kernel deltas (second report minus first)."""

    mean_delta: np.ndarray = field(repr=False)
    variance_delta: np.ndarray = field(repr=False)
    norm_delta: np.ndarray = field(repr=False)
    sparse_count_delta: int

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("index,mean_delta,variance_delta,norm_delta\n")
        for i in range(len(self.mean_delta)):
            out.write(
                f"{i},{self.mean_delta[i]!r},{self.variance_delta[i]!r},"
                f"{self.norm_delta[i]!r}\n"
            )
        return out.getvalue()

    def to_text(self) -> str:
        lines = [
            f"kernels: {len(self.mean_delta)}",
            f"sparse_count_delta: {self.sparse_count_delta:+d}",
            f"mean delta:     avg {np.mean(self.mean_delta):+.6e}  "
            f"max|.| {np.max(np.abs(self.mean_delta)):.6e}",
            f"variance delta: avg {np.mean(self.variance_delta):+.6e}  "
            f"max|.| {np.max(np.abs(self.variance_delta)):.6e}",
            f"norm delta:     avg {np.mean(self.norm_delta):+.6e}  "
            f"max|.| {np.max(np.abs(self.norm_delta)):.6e}",
        ]
        return "\n".join(lines)


def compare_reports(a: KernelStats, b: KernelStats) -> StatsComparison:
    """Per-kernel differences between two reports over the same N.

    Deltas are signed (b minus a); no judgment thresholds are applied.

    Raises
    ------
    ShapeMismatch
        If the reports cover different kernel counts.
    """
    if a.n != b.n:
        raise ShapeMismatch(f"reports cover {a.n} vs {b.n} kernels")
    return StatsComparison(
        mean_delta=b.per_kernel_mean - a.per_kernel_mean,
        variance_delta=b.per_kernel_variance - a.per_kernel_variance,
        norm_delta=b.per_kernel_norm - a.per_kernel_norm,
        sparse_count_delta=b.sparse_count - a.sparse_count,
    )
