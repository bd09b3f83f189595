"""Subspaces of R^m and the distances between them.

A point of the Grassmannian G(m, k) is stored as an explicit m x k matrix
with orthonormal columns. All comparisons between two subspaces reduce to
the k x k product S^T T: its singular values are the cosines of the
principal angles, which in turn define the chordal and Fubini-Study
distances.

Everything here is a pure function on immutable values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, RankDeficient

# Orthonormality is enforced to this max-norm tolerance on construction.
ORTHONORMAL_TOL = 1e-10

# Smallest-to-largest singular value ratio below which a raw matrix is
# treated as rank deficient.
RANK_TOL = 1e-8

# Two subspaces at distance below this are considered the same span
# (double-precision SVD noise ceiling for m <= 64).
SPAN_EQUALITY_TOL = 1e-9


class Metric(enum.Enum):
    """Distance metric on G(m, k)."""

    CHORDAL = "chordal"
    FUBINI_STUDY = "fs"

    @classmethod
    def parse(cls, token: str) -> "Metric":
        """Parse a CLI/manifest token ("chordal" or "fs")."""
        normalized = token.strip().lower()
        for metric in cls:
            if normalized == metric.value:
                return metric
        raise ValueError(f"unknown metric {token!r}: expected 'chordal' or 'fs'")

    @property
    def max_value(self) -> float:
        """Upper end of the metric's range for k = 1 (see `distance` for general k)."""
        return 1.0 if self is Metric.CHORDAL else np.pi / 2


@dataclass(frozen=True, eq=False)
class Subspace:
    """A k-dimensional subspace of R^m, held as an orthonormal basis.

    Parameters
    ----------
    basis : (m, k) ndarray
        Matrix with orthonormal columns spanning the subspace. Validated
        on construction; the stored array is read-only.

    Raises
    ------
    ValueError
        If the basis is not a 2-D real matrix with 1 <= k <= m, or if
        ``||basis^T basis - I||_max`` exceeds ``ORTHONORMAL_TOL``.
    """

    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        basis = np.array(self.basis, dtype=np.float64, copy=True)
        if basis.ndim != 2:
            raise ValueError(f"basis must be 2-D, got shape {basis.shape}")
        m, k = basis.shape
        if not 1 <= k <= m:
            raise ValueError(f"need 1 <= k <= m, got m={m}, k={k}")
        if not np.all(np.isfinite(basis)):
            raise ValueError("basis contains non-finite entries")
        gram_defect = basis.T @ basis - np.eye(k)
        defect = float(np.abs(gram_defect).max())
        if defect > ORTHONORMAL_TOL:
            raise ValueError(
                f"columns not orthonormal: ||B^T B - I||_max = {defect:.3e} "
                f"> {ORTHONORMAL_TOL:.0e}"
            )
        basis.flags.writeable = False
        object.__setattr__(self, "basis", basis)

    @property
    def m(self) -> int:
        """Ambient dimension."""
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        """Subspace dimension."""
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector B B^T onto the subspace (basis independent)."""
        return self.basis @ self.basis.T


def orthonormalize(raw: np.ndarray) -> Subspace:
    """Turn a full-rank m x k matrix into the subspace it spans.

    Uses the reduced QR factorization with the sign convention that the
    diagonal of R is non-negative, which makes the result deterministic
    for a fixed input (and the identity on matrices that already have
    orthonormal columns with positive pivots).

    Parameters
    ----------
    raw : (m, k) array_like
        Spanning matrix. Must have full column rank: smallest singular
        value > ``RANK_TOL`` times the largest.

    Returns
    -------
    Subspace
        Subspace with the same column span as ``raw``.

    Raises
    ------
    RankDeficient
        If the rank precondition fails.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise RankDeficient(f"expected a 2-D matrix, got shape {raw.shape}")
    m, k = raw.shape
    if not 1 <= k <= m:
        raise RankDeficient(f"need 1 <= k <= m, got m={m}, k={k}")
    if not np.all(np.isfinite(raw)):
        raise RankDeficient("matrix contains non-finite entries")
    singular_values = np.linalg.svd(raw, compute_uv=False)
    if singular_values[0] == 0.0 or singular_values[-1] <= RANK_TOL * singular_values[0]:
        raise RankDeficient(
            f"column rank < {k}: singular value ratio "
            f"{singular_values[-1]:.3e} / {singular_values[0]:.3e}"
        )
    q, r = np.linalg.qr(raw)
    signs = np.sign(np.diagonal(r)).copy()
    signs[signs == 0] = 1.0
    return Subspace(q * signs)


def _aligned_product(s: Subspace, t: Subspace) -> np.ndarray:
    if s.m != t.m or s.k != t.k:
        raise DimensionMismatch(
            f"subspaces live on different Grassmannians: "
            f"G({s.m},{s.k}) vs G({t.m},{t.k})"
        )
    return s.basis.T @ t.basis


def principal_angles(s: Subspace, t: Subspace) -> np.ndarray:
    """Principal angles between two subspaces of the same G(m, k).

    The cosines of the angles are the singular values of S^T T, clamped
    to [0, 1] before arccos.

    Returns
    -------
    (k,) ndarray
        Angles in radians, non-decreasing, each in [0, pi/2].

    Raises
    ------
    DimensionMismatch
        If the subspaces do not share (m, k).
    """
    product = _aligned_product(s, t)
    cosines = np.linalg.svd(product, compute_uv=False)
    cosines = np.clip(cosines, 0.0, 1.0)
    # Singular values come out descending, so arccos is already ascending.
    return np.arccos(cosines)


def _chordal_from_product(product: np.ndarray) -> float:
    k = product.shape[0]
    squared = k - float(np.sum(product * product))
    return float(np.sqrt(max(squared, 0.0)))


def _fubini_study_from_product(product: np.ndarray) -> float:
    det = abs(float(np.linalg.det(product)))
    return float(np.arccos(min(det, 1.0)))


def distance(s: Subspace, t: Subspace, metric: Metric) -> float:
    """Distance between two subspaces under the chosen metric.

    Chordal: sqrt(sum_i sin^2 theta_i) = sqrt(k - ||S^T T||_F^2),
    with range [0, sqrt(k)]. Fubini-Study: arccos|det S^T T|
    = arccos(prod_i cos theta_i), with range [0, pi/2]. Both depend on
    the spans only, so they are invariant under right-multiplication of
    either basis by a k x k orthogonal matrix.

    Raises
    ------
    DimensionMismatch
        If the subspaces do not share (m, k).
    """
    product = _aligned_product(s, t)
    if metric is Metric.CHORDAL:
        return _chordal_from_product(product)
    return _fubini_study_from_product(product)


def pairwise_distances(subspaces: Sequence[Subspace], metric: Metric) -> np.ndarray:
    """Symmetric N x N matrix of pairwise distances, zero diagonal.

    Accepts any sequence of subspaces sharing (m, k); a codebook's
    ``distance_matrix()`` delegates here.
    """
    n = len(subspaces)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = distance(subspaces[i], subspaces[j], metric)
            out[i, j] = d
            out[j, i] = d
    return out


def stack_bases(subspaces: Sequence[Subspace]) -> np.ndarray:
    """Stack the bases of N subspaces into an (N, m, k) array."""
    if not subspaces:
        raise ValueError("empty subspace sequence")
    return np.stack([s.basis for s in subspaces])
