"""Grassmannian subspace packings and conv-kernel export.

Construct codebooks of N k-dimensional subspaces of R^m with maximized
minimum pairwise distance, validate them against closed-form bounds, and
export them as first-layer convolution weights with diagnostics.
"""

from .analysis import (
    KernelStats,
    SparsityConfig,
    StatsComparison,
    compare_reports,
    compute_stats,
    distance_spectrum,
)
from .codebook_io import (
    CodebookFile,
    ExportConfig,
    KernelTensor,
    ScaleMode,
    export_kernels,
    kaiming_factor,
    kernels_to_bases,
    read_codebook,
    read_kernels,
    read_kernels_csv,
    write_codebook,
    write_kernels,
    write_kernels_csv,
)
from .errors import (
    CorruptBasis,
    DimensionMismatch,
    EmptyTensor,
    GrasspackError,
    ImproperRandomState,
    InvalidProblem,
    IoFailure,
    MalformedFile,
    RankDeficient,
    ShapeMismatch,
)
from .geometry import (
    Metric,
    Subspace,
    distance,
    orthonormalize,
    pairwise_distances,
    principal_angles,
)
from .packing import (
    Codebook,
    PackingProblem,
    optimize,
    random_codebook,
    rankin_bound,
    rankin_bound_generalized,
    refine,
)

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "CodebookFile",
    "CorruptBasis",
    "DimensionMismatch",
    "EmptyTensor",
    "ExportConfig",
    "GrasspackError",
    "ImproperRandomState",
    "InvalidProblem",
    "IoFailure",
    "KernelStats",
    "KernelTensor",
    "MalformedFile",
    "Metric",
    "PackingProblem",
    "RankDeficient",
    "ScaleMode",
    "ShapeMismatch",
    "SparsityConfig",
    "StatsComparison",
    "Subspace",
    "compare_reports",
    "compute_stats",
    "distance",
    "distance_spectrum",
    "export_kernels",
    "kaiming_factor",
    "kernels_to_bases",
    "optimize",
    "orthonormalize",
    "pairwise_distances",
    "principal_angles",
    "random_codebook",
    "rankin_bound",
    "rankin_bound_generalized",
    "read_codebook",
    "read_kernels",
    "read_kernels_csv",
    "refine",
    "write_codebook",
    "write_kernels",
    "write_kernels_csv",
]
