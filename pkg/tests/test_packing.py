"""Packing problems, Rankin bounds, and the max-min optimizer."""

import math

import numpy as np
import pytest

from grasspack.errors import InvalidProblem
from grasspack.geometry import Metric, Subspace, distance, orthonormalize
from grasspack.packing import (
    Codebook,
    PackingProblem,
    optimize,
    random_codebook,
    rankin_bound,
    rankin_bound_generalized,
    refine,
)
from grasspack import packing

# ---------------------------------------------------------------------------
# known optimal line configurations (independent oracles)
# ---------------------------------------------------------------------------


def trine_lines() -> list[Subspace]:
    """Three lines in R^2 at 0, 60, 120 degrees (optimal for N=3)."""
    return [
        Subspace(np.array([[math.cos(a)], [math.sin(a)]]))
        for a in (0.0, math.pi / 3, 2 * math.pi / 3)
    ]


def cube_diagonal_lines() -> list[Subspace]:
    """Four body diagonals of the cube (optimal for N=4 in R^3)."""
    dirs = [(1, 1, 1), (1, 1, -1), (1, -1, 1), (-1, 1, 1)]
    return [
        Subspace(np.array(d, dtype=float)[:, None] / math.sqrt(3.0)) for d in dirs
    ]


def icosahedral_lines() -> list[Subspace]:
    """Six diagonals of the icosahedron (optimal for N=6 in R^3)."""
    phi = (1 + math.sqrt(5.0)) / 2
    dirs = [(0, 1, phi), (0, 1, -phi), (1, phi, 0), (1, -phi, 0), (phi, 0, 1), (-phi, 0, 1)]
    return [orthonormalize(np.array(d, dtype=float)[:, None]) for d in dirs]


def brute_force_min_distance(subspaces, metric) -> float:
    values = [
        distance(subspaces[i], subspaces[j], metric)
        for i in range(len(subspaces))
        for j in range(i + 1, len(subspaces))
    ]
    return min(values)


class TestKnownConfigurations:
    """The explicit configurations attain the Rankin bound with equality."""

    def test_trine_attains_bound(self):
        delta = brute_force_min_distance(trine_lines(), Metric.CHORDAL)
        assert abs(delta - rankin_bound(2, 1, 3)) <= 1e-12
        assert abs(delta - math.sqrt(3.0) / 2) <= 1e-12

    def test_cube_diagonals_attain_bound(self):
        delta = brute_force_min_distance(cube_diagonal_lines(), Metric.CHORDAL)
        assert abs(delta - rankin_bound(3, 1, 4)) <= 1e-12
        assert abs(delta - math.sqrt(8.0) / 3) <= 1e-12

    def test_icosahedral_lines_attain_bound(self):
        delta = brute_force_min_distance(icosahedral_lines(), Metric.CHORDAL)
        assert abs(delta - rankin_bound(3, 1, 6)) <= 1e-12
        assert abs(delta - 2 / math.sqrt(5.0)) <= 1e-12


# ---------------------------------------------------------------------------
# Rankin bound
# ---------------------------------------------------------------------------


class TestRankinBound:
    def test_direct_evaluations(self):
        assert abs(rankin_bound(2, 1, 3) - math.sqrt(3.0 / 4.0)) <= 1e-15
        assert abs(rankin_bound(2, 1, 3) - 0.86603) <= 5e-6
        assert abs(rankin_bound(3, 1, 4) - math.sqrt(8.0 / 9.0)) <= 1e-15
        assert abs(rankin_bound(3, 1, 4) - 0.94281) <= 5e-6

    def test_full_k_gives_zero(self):
        assert rankin_bound(4, 4, 7) == 0.0

    def test_generalized_coincides_for_lines(self):
        for m, n in [(2, 3), (3, 4), (9, 32)]:
            assert abs(rankin_bound(m, 1, n) - rankin_bound_generalized(m, 1, n)) <= 1e-15

    def test_generalized_carries_sqrt_k(self):
        assert abs(
            rankin_bound_generalized(9, 3, 32) - math.sqrt(3.0) * rankin_bound(9, 3, 32)
        ) <= 1e-12

    def test_invalid_arguments(self):
        with pytest.raises(InvalidProblem):
            rankin_bound(2, 3, 4)
        with pytest.raises(InvalidProblem):
            rankin_bound(3, 1, 1)
        with pytest.raises(InvalidProblem):
            rankin_bound(0, 0, 5)


# ---------------------------------------------------------------------------
# problem and codebook validation
# ---------------------------------------------------------------------------


class TestPackingProblem:
    def test_invalid_dimensions(self):
        with pytest.raises(InvalidProblem):
            PackingProblem(m=2, k=3, n=4, metric=Metric.CHORDAL)

    def test_invalid_counts(self):
        with pytest.raises(InvalidProblem):
            PackingProblem(m=3, k=1, n=0, metric=Metric.CHORDAL)
        with pytest.raises(InvalidProblem):
            PackingProblem(m=3, k=1, n=4, metric=Metric.CHORDAL, restarts=0)
        with pytest.raises(InvalidProblem):
            PackingProblem(m=3, k=1, n=4, metric=Metric.CHORDAL, max_iters=0)

    def test_invalid_tolerance_and_seed(self):
        with pytest.raises(InvalidProblem):
            PackingProblem(m=3, k=1, n=4, metric=Metric.CHORDAL, tolerance=0.0)
        with pytest.raises(InvalidProblem):
            PackingProblem(m=3, k=1, n=4, metric=Metric.CHORDAL, seed=-1)
        with pytest.raises(InvalidProblem):
            PackingProblem(m=3, k=1, n=4, metric=Metric.CHORDAL, seed=2**64)

    def test_metric_must_be_enum(self):
        with pytest.raises(InvalidProblem):
            PackingProblem(m=3, k=1, n=4, metric="chordal")


class TestCodebookInvariants:
    def test_stored_min_distance_must_match(self):
        problem = PackingProblem(m=2, k=1, n=3, metric=Metric.CHORDAL)
        with pytest.raises(InvalidProblem, match="disagrees"):
            Codebook(
                problem=problem,
                subspaces=tuple(trine_lines()),
                min_distance=0.5,
                rankin_bound=rankin_bound(2, 1, 3),
                rankin_bound_generalized=rankin_bound_generalized(2, 1, 3),
                iterations_used=0,
                converged=True,
            )

    def test_subspace_count_must_match(self):
        problem = PackingProblem(m=2, k=1, n=4, metric=Metric.CHORDAL)
        with pytest.raises(InvalidProblem):
            Codebook.from_subspaces(problem, trine_lines())

    def test_from_subspaces_recomputes(self):
        problem = PackingProblem(m=2, k=1, n=3, metric=Metric.CHORDAL)
        cb = Codebook.from_subspaces(problem, trine_lines())
        assert abs(cb.min_distance - math.sqrt(3.0) / 2) <= 1e-12
        assert abs(cb.min_distance - np.min(cb.distance_matrix()[~np.eye(3, dtype=bool)])) <= 1e-12


# ---------------------------------------------------------------------------
# random codebooks
# ---------------------------------------------------------------------------


class TestRandomCodebook:
    def test_same_seed_bit_exact(self):
        problem = PackingProblem(m=4, k=2, n=5, metric=Metric.CHORDAL, seed=9)
        a = random_codebook(problem)
        b = random_codebook(problem)
        for x, y in zip(a.subspaces, b.subspaces):
            assert np.array_equal(x.basis, y.basis)
        assert a.min_distance == b.min_distance

    def test_different_seeds_differ(self):
        base = dict(m=4, k=2, n=5, metric=Metric.CHORDAL)
        a = random_codebook(PackingProblem(seed=1, **base))
        b = random_codebook(PackingProblem(seed=2, **base))
        assert a.min_distance != b.min_distance

    def test_two_lines_match_direct_distance(self):
        problem = PackingProblem(m=2, k=1, n=2, metric=Metric.CHORDAL, seed=123)
        cb = random_codebook(problem)
        direct = distance(cb.subspaces[0], cb.subspaces[1], Metric.CHORDAL)
        assert abs(cb.min_distance - direct) <= 1e-12

    def test_orthonormality(self):
        cb = random_codebook(PackingProblem(m=9, k=3, n=8, metric=Metric.CHORDAL, seed=0))
        for s in cb.subspaces:
            assert np.abs(s.basis.T @ s.basis - np.eye(3)).max() <= 1e-10


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


class TestOptimize:
    def test_trine(self):
        problem = PackingProblem(
            m=2, k=1, n=3, metric=Metric.CHORDAL, seed=7, restarts=6, max_iters=800
        )
        cb = optimize(problem)
        assert cb.min_distance >= rankin_bound(2, 1, 3) - 1e-3
        assert cb.min_distance <= cb.rankin_bound + 1e-6

    def test_cube_diagonals(self):
        problem = PackingProblem(
            m=3, k=1, n=4, metric=Metric.CHORDAL, seed=7, restarts=6, max_iters=800
        )
        cb = optimize(problem)
        assert cb.min_distance >= rankin_bound(3, 1, 4) - 1e-3

    def test_icosahedron(self):
        problem = PackingProblem(
            m=3, k=1, n=6, metric=Metric.CHORDAL, seed=7, restarts=8, max_iters=1200
        )
        cb = optimize(problem)
        assert cb.min_distance >= rankin_bound(3, 1, 6) - 2e-3

    def test_fs_trine_attains_sixty_degrees(self):
        # For k=1 the Fubini-Study distance is the angle itself.
        problem = PackingProblem(
            m=2, k=1, n=3, metric=Metric.FUBINI_STUDY, seed=7, restarts=6, max_iters=800
        )
        cb = optimize(problem)
        assert cb.min_distance >= math.pi / 3 - 1e-3

    def test_bit_stable_per_seed(self):
        problem = PackingProblem(
            m=4, k=2, n=6, metric=Metric.CHORDAL, seed=3, restarts=3, max_iters=200
        )
        a = optimize(problem)
        b = optimize(problem)
        for x, y in zip(a.subspaces, b.subspaces):
            assert np.array_equal(x.basis, y.basis)
        assert a.min_distance == b.min_distance
        assert a.iterations_used == b.iterations_used

    def test_beats_own_initialization(self):
        problem = PackingProblem(
            m=4, k=2, n=5, metric=Metric.CHORDAL, seed=11, restarts=1, max_iters=300
        )
        rng = np.random.default_rng(np.random.SeedSequence(11).spawn(1)[0])
        init = packing._draw_bases(rng, 5, 4, 2)
        init_delta = packing._min_distance_stacked(init, Metric.CHORDAL)
        cb = optimize(problem)
        assert cb.min_distance >= init_delta

    def test_chordal_respects_generalized_bound(self):
        problem = PackingProblem(
            m=6, k=2, n=8, metric=Metric.CHORDAL, seed=1, restarts=3, max_iters=300
        )
        cb = optimize(problem)
        assert cb.min_distance <= rankin_bound_generalized(6, 2, 8) + 1e-6

    def test_stored_distance_reproducible_from_bases(self):
        problem = PackingProblem(
            m=5, k=2, n=4, metric=Metric.FUBINI_STUDY, seed=2, restarts=2, max_iters=200
        )
        cb = optimize(problem)
        assert abs(cb.min_distance - brute_force_min_distance(cb.subspaces, Metric.FUBINI_STUDY)) <= 1e-9

    def test_single_subspace_request(self):
        problem = PackingProblem(m=3, k=1, n=1, metric=Metric.CHORDAL, seed=4)
        cb = optimize(problem)
        assert len(cb.subspaces) == 1
        assert cb.min_distance is None
        assert cb.converged


# ---------------------------------------------------------------------------
# refine
# ---------------------------------------------------------------------------


class TestRefine:
    def test_zero_iters_unchanged(self):
        cb = random_codebook(PackingProblem(m=3, k=1, n=4, metric=Metric.CHORDAL, seed=5))
        assert refine(cb, 0) is cb

    def test_monotone_on_random_codebook(self):
        cb = random_codebook(PackingProblem(m=4, k=2, n=3, metric=Metric.CHORDAL, seed=2))
        refined = refine(cb, 100)
        assert refined.min_distance >= cb.min_distance

    def test_optimal_trine_unmoved(self):
        problem = PackingProblem(m=2, k=1, n=3, metric=Metric.CHORDAL)
        cb = Codebook.from_subspaces(problem, trine_lines())
        refined = refine(cb, 50)
        assert abs(refined.min_distance - cb.min_distance) <= 1e-6

    def test_negative_iters_rejected(self):
        cb = random_codebook(PackingProblem(m=3, k=1, n=4, metric=Metric.CHORDAL, seed=5))
        with pytest.raises(InvalidProblem):
            refine(cb, -1)
