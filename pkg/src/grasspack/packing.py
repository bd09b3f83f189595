"""Max-min packing of N subspaces on G(m, k).

The search maximizes the minimum pairwise distance of a codebook with a
two-stage scheme, run independently from multiple random restarts:

Stage 1 ascends the soft minimum of the squared pairwise distances,
``-(1/beta) log sum_{i<j} exp(-beta d_ij^2)``, by gradient steps on the
basis entries followed by a QR retraction of every basis. The sharpness
``beta`` doubles whenever the relative improvement drops below the
problem tolerance, so the surrogate anneals toward the true max-min
objective. (Equivalently: the softmax-weighted repulsion
``sum exp(-beta d^2)`` is minimized; the soft-min form is used because
its weights can be normalized, which stays finite at large ``beta``.)

Stage 2 polishes the result by direct ascent on the single
minimum-distance pair, accepting only steps that strictly improve the
minimum distance.

For the Fubini-Study metric, whose arccos-of-determinant gradient is
ill-conditioned near singular cross-products, stage 1 runs on the
sin^2-sum (squared chordal) surrogate for the first 90% of the
iteration budget and on the true metric for the remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ImproperRandomState, InvalidProblem
from .geometry import (
    Metric,
    RANK_TOL,
    Subspace,
    orthonormalize,
    pairwise_distances,
    stack_bases,
)

_BETA_MAX = 1e8
_STEP0 = 0.05
_STEP_FLOOR = 1e-14
_MAX_HALVINGS = 30
_POLISH_STEP0 = 0.02
_POLISH_STEP_MAX = 0.1
_DET_GUARD = 1e-10
_RANK_RETRY_LIMIT = 100


def rankin_bound(m: int, k: int, n: int) -> float:
    """Upper bound sqrt((m - k) N / (m (N - 1))) on the minimum chordal distance.

    This is the bound exactly as printed in the source formula; for k = 1 it
    is the classical line-packing simplex bound and is attained with equality
    by e.g. the trine (m=2, N=3) and cube-diagonal (m=3, N=4) configurations.
    See `rankin_bound_generalized` for the k-aware form.

    Raises
    ------
    InvalidProblem
        If not 1 <= k <= m or N < 2.
    """
    _check_bound_args(m, k, n)
    return math.sqrt((m - k) * n / (m * (n - 1)))


def rankin_bound_generalized(m: int, k: int, n: int) -> float:
    """Simplex bound sqrt(k (m - k) / m * N / (N - 1)) for chordal packings.

    Carries the factor of k that the plain `rankin_bound` form omits; the
    two coincide for k = 1. Chordal codebooks are validated against this
    form, since for k > 1 the plain form lies below distances that real
    packings achieve.
    """
    _check_bound_args(m, k, n)
    return math.sqrt(k * (m - k) / m * n / (n - 1))


def _check_bound_args(m: int, k: int, n: int) -> None:
    if m < 1 or k < 1 or not k <= m:
        raise InvalidProblem(f"need 1 <= k <= m, got m={m}, k={k}")
    if n < 2:
        raise InvalidProblem(f"bound requires N >= 2, got N={n}")


@dataclass(frozen=True)
class PackingProblem:
    """Parameters of one max-min packing search on G(m, k).

    ``n`` is the codebook size N. ``restarts`` independent searches are
    run, each with an iteration budget of ``max_iters``; ``tolerance`` is
    the relative-improvement threshold that drives the annealing
    schedule. ``seed`` makes the whole search deterministic.
    """

    m: int
    k: int
    n: int
    metric: Metric
    restarts: int = 20
    max_iters: int = 2000
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        for name in ("m", "k", "n", "restarts", "max_iters", "seed"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise InvalidProblem(f"{name} must be an integer, got {value!r}")
        if not 1 <= self.k <= self.m:
            raise InvalidProblem(f"need 1 <= k <= m, got m={self.m}, k={self.k}")
        if self.n < 1:
            raise InvalidProblem(f"need N >= 1, got N={self.n}")
        if self.restarts < 1:
            raise InvalidProblem(f"need restarts >= 1, got {self.restarts}")
        if self.max_iters < 1:
            raise InvalidProblem(f"need max_iters >= 1, got {self.max_iters}")
        if not (isinstance(self.tolerance, (float, int)) and self.tolerance > 0):
            raise InvalidProblem(f"need tolerance > 0, got {self.tolerance!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidProblem(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if not isinstance(self.metric, Metric):
            raise InvalidProblem(f"metric must be a Metric, got {self.metric!r}")


@dataclass(frozen=True)
class Codebook:
    """An ordered set of N subspaces of one G(m, k) plus its packing quality.

    ``min_distance`` is the achieved minimum pairwise distance under the
    problem's metric, or None for the degenerate single-subspace case.
    Both Rankin bound forms are carried; chordal codebooks must respect
    the generalized one (the forms coincide for k = 1).
    """

    problem: PackingProblem
    subspaces: tuple[Subspace, ...]
    min_distance: float | None
    rankin_bound: float
    rankin_bound_generalized: float
    iterations_used: int
    converged: bool

    def __post_init__(self):
        object.__setattr__(self, "subspaces", tuple(self.subspaces))
        if len(self.subspaces) != self.problem.n:
            raise InvalidProblem(
                f"codebook holds {len(self.subspaces)} subspaces, "
                f"problem wants N={self.problem.n}"
            )
        for s in self.subspaces:
            if (s.m, s.k) != (self.problem.m, self.problem.k):
                raise InvalidProblem(
                    f"subspace on G({s.m},{s.k}) does not match problem "
                    f"G({self.problem.m},{self.problem.k})"
                )
        if self.problem.n == 1:
            if self.min_distance is not None:
                raise InvalidProblem("single-subspace codebook has no min distance")
            return
        recomputed = float(np.min(_offdiag(self.distance_matrix())))
        if self.min_distance is None or abs(self.min_distance - recomputed) > 1e-9:
            raise InvalidProblem(
                f"stored min_distance {self.min_distance!r} disagrees with "
                f"recomputed {recomputed!r}"
            )
        if (
            self.problem.metric is Metric.CHORDAL
            and self.min_distance > self.rankin_bound_generalized + 1e-6
        ):
            raise InvalidProblem(
                f"chordal min distance {self.min_distance} exceeds the "
                f"simplex bound {self.rankin_bound_generalized}; "
                "this indicates a distance-computation bug"
            )

    @classmethod
    def from_subspaces(
        cls,
        problem: PackingProblem,
        subspaces: Sequence[Subspace],
        iterations_used: int = 0,
        converged: bool = False,
    ) -> "Codebook":
        """Build a codebook, computing its minimum distance and bounds."""
        subspaces = tuple(subspaces)
        if problem.n >= 2:
            dist = pairwise_distances(subspaces, problem.metric)
            min_distance = float(np.min(_offdiag(dist)))
            bound = rankin_bound(problem.m, problem.k, problem.n)
            bound_gen = rankin_bound_generalized(problem.m, problem.k, problem.n)
        else:
            min_distance = None
            bound = 0.0
            bound_gen = 0.0
        return cls(
            problem=problem,
            subspaces=subspaces,
            min_distance=min_distance,
            rankin_bound=bound,
            rankin_bound_generalized=bound_gen,
            iterations_used=iterations_used,
            converged=converged,
        )

    def distance_matrix(self) -> np.ndarray:
        """N x N pairwise distances under the problem's metric."""
        return pairwise_distances(self.subspaces, self.problem.metric)

    def bases(self) -> np.ndarray:
        """Stacked bases, shape (N, m, k)."""
        return stack_bases(self.subspaces)


def _offdiag(matrix: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    return matrix[~np.eye(n, dtype=bool)]


def _draw_bases(rng: np.random.Generator, n: int, m: int, k: int) -> np.ndarray:
    """Draw n independent orthonormal bases, retrying rank-deficient samples."""
    bases = np.empty((n, m, k))
    for i in range(n):
        for _ in range(_RANK_RETRY_LIMIT):
            raw = rng.standard_normal((m, k))
            sv = np.linalg.svd(raw, compute_uv=False)
            if sv[0] > 0.0 and sv[-1] > RANK_TOL * sv[0]:
                bases[i] = orthonormalize(raw).basis
                break
        else:
            raise ImproperRandomState(
                f"{_RANK_RETRY_LIMIT} consecutive rank-deficient draws for "
                f"subspace {i} of G({m},{k})"
            )
    return bases


def random_codebook(problem: PackingProblem) -> Codebook:
    """Codebook of N independent uniformly drawn subspaces.

    Each subspace is the orthonormalization of an i.i.d. standard-normal
    m x k matrix from a generator seeded with ``problem.seed``, so the
    result is deterministic per seed.
    """
    rng = np.random.default_rng(problem.seed)
    bases = _draw_bases(rng, problem.n, problem.m, problem.k)
    subspaces = [Subspace(b) for b in bases]
    return Codebook.from_subspaces(problem, subspaces)


# ---------------------------------------------------------------------------
# stacked-array internals
# ---------------------------------------------------------------------------


def _cross_products(bases: np.ndarray) -> np.ndarray:
    """All pairwise k x k products: out[i, j] = B_i^T B_j."""
    return np.einsum("iap,jaq->ijpq", bases, bases)


def _chordal_sq(products: np.ndarray) -> np.ndarray:
    k = products.shape[-1]
    d2 = k - np.einsum("ijpq,ijpq->ij", products, products)
    return np.maximum(d2, 0.0)


def _fs_cos(products: np.ndarray) -> np.ndarray:
    return np.minimum(np.abs(np.linalg.det(products)), 1.0)


def _distance_matrix_stacked(bases: np.ndarray, metric: Metric) -> np.ndarray:
    products = _cross_products(bases)
    if metric is Metric.CHORDAL:
        dist = np.sqrt(_chordal_sq(products))
    else:
        dist = np.arccos(_fs_cos(products))
    np.fill_diagonal(dist, 0.0)
    return dist


def _min_distance_stacked(bases: np.ndarray, metric: Metric) -> float:
    dist = _distance_matrix_stacked(bases, metric)
    return float(np.min(_offdiag(dist)))


def _retract(bases: np.ndarray) -> np.ndarray:
    """QR retraction with non-negative R diagonal, batched over bases."""
    q, r = np.linalg.qr(bases)
    signs = np.sign(np.einsum("...ii->...i", r))
    signs[signs == 0] = 1.0
    return q * signs[..., None, :]


def _squared_dist_and_grad_weighted(
    bases: np.ndarray, weights: np.ndarray, use_fs: bool
) -> np.ndarray:
    """Weighted sum over pairs of the squared-distance gradients.

    Returns the ascent direction d/dB of sum_{ij} weights_ij d2_ij where
    d2 is squared chordal or squared Fubini-Study distance. ``weights``
    must be symmetric with zero diagonal.
    """
    products = _cross_products(bases)
    if not use_fs:
        # d(d2)/dB_i for pair (i,j) is -2 B_j (B_j^T B_i)
        return -2.0 * np.einsum("ij,jap,ijqp->iaq", weights, bases, products)
    det = np.linalg.det(products)
    cos = np.abs(det)
    np.fill_diagonal(cos, 1.0)
    angle = np.arccos(np.minimum(cos, 1.0))
    sin = np.sqrt(np.maximum(1.0 - cos * cos, 1e-30))
    factor = 2.0 * angle * cos / sin
    # Near-singular cross products sit at (or near) the metric's maximum
    # and contribute no useful gradient; mask them out before inverting.
    invertible = cos > _DET_GUARD
    factor = np.where(invertible, factor, 0.0)
    safe = np.where(invertible[..., None, None], products, np.eye(products.shape[-1]))
    inverses = np.linalg.inv(safe)
    return -np.einsum("ij,jap,ijpq->iaq", weights * factor, bases, inverses)


def _softmin_and_weights(
    bases: np.ndarray, beta: float, use_fs: bool
) -> tuple[float, np.ndarray]:
    """Soft minimum of squared pairwise distances and its softmax weights."""
    products = _cross_products(bases)
    if use_fs:
        angle = np.arccos(_fs_cos(products))
        d2 = angle * angle
    else:
        d2 = _chordal_sq(products)
    scores = -beta * d2
    np.fill_diagonal(scores, -np.inf)
    top = float(np.max(scores))
    weights = np.exp(scores - top)
    np.fill_diagonal(weights, 0.0)
    total = float(np.sum(weights))
    softmin = -(top + math.log(total)) / beta
    return softmin, weights / total


def _stage1_anneal(
    bases: np.ndarray,
    metric: Metric,
    max_iters: int,
    tolerance: float,
    k: int,
) -> tuple[np.ndarray, float, np.ndarray, int]:
    """Annealed soft-min ascent. Returns (best bases, best min dist, last bases, iters)."""
    fs_switch = max_iters - max_iters // 10 if metric is Metric.FUBINI_STUDY else max_iters
    beta = 2.0 / k
    step = _STEP0
    use_fs = False
    softmin, weights = _softmin_and_weights(bases, beta, use_fs)
    best = bases.copy()
    best_delta = _min_distance_stacked(bases, metric)
    iters = 0
    while iters < max_iters:
        if metric is Metric.FUBINI_STUDY and not use_fs and iters >= fs_switch:
            use_fs = True
            beta = max(beta, 2.0)
            step = _STEP0
            softmin, weights = _softmin_and_weights(bases, beta, use_fs)
        grad = _squared_dist_and_grad_weighted(bases, weights, use_fs)
        accepted = False
        for _ in range(_MAX_HALVINGS):
            candidate = _retract(bases + step * grad)
            cand_softmin, cand_weights = _softmin_and_weights(candidate, beta, use_fs)
            if cand_softmin > softmin:
                improvement = (cand_softmin - softmin) / max(abs(softmin), 1e-12)
                bases, softmin, weights = candidate, cand_softmin, cand_weights
                delta = _min_distance_stacked(bases, metric)
                if delta > best_delta:
                    best, best_delta = bases.copy(), delta
                accepted = True
                break
            step *= 0.5
            if step < _STEP_FLOOR:
                break
        iters += 1
        if not accepted or improvement < tolerance:
            beta *= 2.0
            step = _STEP0
            if beta > _BETA_MAX:
                break
            softmin, weights = _softmin_and_weights(bases, beta, use_fs)
    return best, best_delta, bases, iters


def _pair_distance_gradients(
    bases: np.ndarray, i: int, j: int, metric: Metric
) -> tuple[np.ndarray, np.ndarray]:
    """Ascent gradients of d(B_i, B_j) (unsquared) for both endpoints."""
    product = bases[i].T @ bases[j]
    if metric is Metric.CHORDAL:
        k = product.shape[0]
        d = math.sqrt(max(k - float(np.sum(product * product)), 0.0))
        denom = max(d, 1e-12)
        grad_i = -(bases[j] @ product.T) / denom
        grad_j = -(bases[i] @ product) / denom
    else:
        det = float(np.linalg.det(product))
        cos = min(abs(det), 1.0)
        if cos <= _DET_GUARD:
            # Already at (or numerically at) the metric maximum pi/2.
            zero = np.zeros_like(bases[i])
            return zero, zero
        sin = math.sqrt(max(1.0 - cos * cos, 1e-30))
        inverse = np.linalg.inv(product)
        grad_i = -(cos / sin) * (bases[j] @ inverse)
        grad_j = -(cos / sin) * (bases[i] @ inverse.T)
    return grad_i, grad_j


def _polish(
    bases: np.ndarray, metric: Metric, max_steps: int
) -> tuple[np.ndarray, float, int, bool]:
    """Direct ascent on the minimum-distance pair; strictly monotone.

    Returns (bases, min distance, steps used, converged). ``converged``
    means no step on the minimum pair improved the minimum distance.
    """
    dist = _distance_matrix_stacked(bases, metric)
    n = dist.shape[0]
    masked = dist + np.diag(np.full(n, np.inf))
    delta = float(np.min(masked))
    step = _POLISH_STEP0
    converged = False
    used = 0
    for _ in range(max_steps):
        used += 1
        i, j = np.unravel_index(int(np.argmin(masked)), masked.shape)
        grad_i, grad_j = _pair_distance_gradients(bases, i, j, metric)
        norm = max(float(np.linalg.norm(grad_i)), float(np.linalg.norm(grad_j)))
        if norm == 0.0:
            converged = True
            break
        scale = min(1.0, 10.0 / norm)
        improved = False
        while step >= _STEP_FLOOR:
            candidate = bases.copy()
            candidate[i] = _retract(bases[i] + step * scale * grad_i)
            candidate[j] = _retract(bases[j] + step * scale * grad_j)
            cand_dist = _distance_matrix_stacked(candidate, metric)
            cand_masked = cand_dist + np.diag(np.full(n, np.inf))
            cand_delta = float(np.min(cand_masked))
            if cand_delta > delta:
                bases, masked, delta = candidate, cand_masked, cand_delta
                step = min(step * 1.3, _POLISH_STEP_MAX)
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True
            break
    return bases, delta, used, converged


def _run_restart(
    problem: PackingProblem, rng: np.random.Generator
) -> tuple[np.ndarray, float, int, bool]:
    bases = _draw_bases(rng, problem.n, problem.m, problem.k)
    init_delta = _min_distance_stacked(bases, problem.metric)
    best, best_delta, last, iters = _stage1_anneal(
        bases, problem.metric, problem.max_iters, problem.tolerance, problem.k
    )
    if init_delta > best_delta:
        best, best_delta = bases, init_delta
    polish_budget = max(100, problem.max_iters // 10)
    polished, polished_delta, polish_used, polish_converged = _polish(
        best.copy(), problem.metric, polish_budget
    )
    if polished_delta < best_delta:
        polished, polished_delta = best, best_delta
    annealed_out = iters < problem.max_iters
    return polished, polished_delta, iters + polish_used, annealed_out and polish_converged


def optimize(problem: PackingProblem) -> Codebook:
    """Search for the codebook maximizing the minimum pairwise distance.

    Runs ``problem.restarts`` independent annealed searches (each seeded
    deterministically from ``problem.seed``) and keeps the best result;
    ties break toward the lower restart index. The returned minimum
    distance is never below that of the winning restart's own random
    initialization. Failure to converge is not an error: the best
    iterate is returned with ``converged=False``.

    Raises
    ------
    InvalidProblem
        If the problem parameters are invalid.
    ImproperRandomState
        If random initialization keeps producing rank-deficient draws.
    """
    if problem.n == 1:
        rng = np.random.default_rng(problem.seed)
        bases = _draw_bases(rng, 1, problem.m, problem.k)
        return Codebook.from_subspaces(
            problem, [Subspace(bases[0])], iterations_used=0, converged=True
        )
    children = np.random.SeedSequence(problem.seed).spawn(problem.restarts)
    best_result = None
    for child in children:
        result = _run_restart(problem, np.random.default_rng(child))
        if best_result is None or result[1] > best_result[1]:
            best_result = result
    bases, _, iterations, converged = best_result
    subspaces = [Subspace(b) for b in bases]
    return Codebook.from_subspaces(
        problem, subspaces, iterations_used=iterations, converged=converged
    )


def refine(codebook: Codebook, extra_iters: int) -> Codebook:
    """Resume minimum-pair ascent on an existing codebook.

    The result's minimum distance is never below the input's; with
    ``extra_iters=0`` the codebook is returned unchanged.
    """
    if extra_iters < 0:
        raise InvalidProblem(f"extra_iters must be >= 0, got {extra_iters}")
    if extra_iters == 0 or codebook.problem.n < 2:
        return codebook
    bases = codebook.bases().copy()
    metric = codebook.problem.metric
    start_delta = _min_distance_stacked(bases, metric)
    polished, delta, used, converged = _polish(bases, metric, extra_iters)
    if delta < start_delta:
        polished = codebook.bases()
    subspaces = [Subspace(b) for b in polished]
    return Codebook.from_subspaces(
        codebook.problem,
        subspaces,
        iterations_used=codebook.iterations_used + used,
        converged=converged,
    )
