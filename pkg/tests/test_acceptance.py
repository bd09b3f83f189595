"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import math
import time

import numpy as np
import pytest

from grasspack.cli import main
from grasspack.codebook_io import (
    ExportConfig,
    ScaleMode,
    export_kernels,
    read_codebook,
    read_kernels,
    write_codebook,
    write_kernels,
)
from grasspack.geometry import (
    Metric,
    Subspace,
    distance,
    orthonormalize,
    pairwise_distances,
    principal_angles,
)
from grasspack.packing import PackingProblem, optimize, random_codebook, rankin_bound


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# criterion 1: Rankin-equality optima, total < 60 s on one core
# ---------------------------------------------------------------------------


class TestRankinEqualityOptima:
    targets = {
        "trine": ((2, 1, 3), 0.86503),
        "cube-diagonals": ((3, 1, 4), 0.94181),
        "icosahedral-lines": ((3, 1, 6), 0.89243),
    }

    @pytest.fixture(scope="class")
    @classmethod
    def results(cls):
        start = time.monotonic()
        out = {}
        for name, ((m, k, n), floor) in cls.targets.items():
            problem = PackingProblem(m=m, k=k, n=n, metric=Metric.CHORDAL, seed=7)
            out[name] = (optimize(problem), floor)
        out["elapsed"] = time.monotonic() - start
        return out

    @pytest.mark.parametrize("name", ["trine", "cube-diagonals", "icosahedral-lines"])
    def test_optimum_reached(self, results, name):
        codebook, floor = results[name]
        (m, k, n), _ = self.targets[name]
        _report(
            f"optimum {name} G({m},{k}) N={n}",
            codebook.min_distance >= floor,
            f"delta={codebook.min_distance:.6f} >= {floor} "
            f"(bound {rankin_bound(m, k, n):.6f})",
        )

    def test_total_runtime(self, results):
        _report(
            "optima runtime",
            results["elapsed"] < 60.0,
            f"{results['elapsed']:.1f}s < 60s",
        )


# ---------------------------------------------------------------------------
# criterion 2: paper-scale codebooks through the CLI
# ---------------------------------------------------------------------------

_PAPER_SCALE = [
    # (m, k, n, metric token, restarts, iters) -- the two color shapes use
    # the Fubini-Study metric, matching how those codebooks are produced.
    (9, 1, 32, "chordal", 4, 800),
    (9, 3, 32, "fs", 3, 600),
    (49, 3, 64, "fs", 2, 400),
]


@pytest.fixture(scope="module")
def paper_scale_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("paper_scale")
    out = []
    for m, k, n, metric, restarts, iters in _PAPER_SCALE:
        path = root / f"g{m}_{k}_{n}.gpk"
        start = time.monotonic()
        code = main(
            [
                "gen", "--m", str(m), "--k", str(k), "--n", str(n),
                "--metric", metric, "--restarts", str(restarts),
                "--max-iters", str(iters), "--seed", "1", "-o", str(path),
            ]
        )
        elapsed = time.monotonic() - start
        assert code == 0
        out.append((m, k, n, metric, path, elapsed))
    return out


class TestPaperScaleCodebooks:
    def test_each_completes_within_ten_minutes(self, paper_scale_files):
        for m, k, n, metric, _, elapsed in paper_scale_files:
            _report(
                f"gen G({m},{k}) N={n} {metric} runtime",
                elapsed < 600.0,
                f"{elapsed:.1f}s < 600s",
            )

    def test_orthonormality(self, paper_scale_files):
        for m, k, n, metric, path, _ in paper_scale_files:
            codebook = read_codebook(path)
            defect = max(
                float(np.abs(s.basis.T @ s.basis - np.eye(k)).max())
                for s in codebook.subspaces
            )
            _report(
                f"orthonormality G({m},{k}) N={n}",
                defect <= 1e-10,
                f"max defect {defect:.2e} <= 1e-10",
            )

    def test_stored_delta_matches_recomputation(self, paper_scale_files):
        for m, k, n, metric, path, _ in paper_scale_files:
            codebook = read_codebook(path)
            matrix = pairwise_distances(codebook.subspaces, codebook.problem.metric)
            recomputed = float(np.min(matrix[~np.eye(n, dtype=bool)]))
            gap = abs(codebook.min_distance - recomputed)
            _report(
                f"stored delta G({m},{k}) N={n}",
                gap <= 1e-9,
                f"|stored - recomputed| = {gap:.2e} <= 1e-9",
            )

    def test_chordal_delta_within_bound(self, paper_scale_files):
        for m, k, n, metric, path, _ in paper_scale_files:
            if metric != "chordal":
                continue
            codebook = read_codebook(path)
            bound = rankin_bound(m, k, n)
            _report(
                f"chordal bound G({m},{k}) N={n}",
                codebook.min_distance <= bound + 1e-6,
                f"delta={codebook.min_distance:.6f} <= bound {bound:.6f} + 1e-6",
            )


# ---------------------------------------------------------------------------
# criterion 3: metric consistency over 1000 random pairs per shape
# ---------------------------------------------------------------------------


class TestMetricConsistency:
    shapes = [(4, 2), (9, 3), (49, 3)]
    pairs = 1000

    @pytest.mark.parametrize("shape", shapes, ids=lambda s: f"G({s[0]},{s[1]})")
    def test_thousand_random_pairs(self, shape):
        m, k = shape
        rng = np.random.default_rng(2024)
        worst_chordal = worst_fs = worst_invariance = 0.0
        for _ in range(self.pairs):
            s = orthonormalize(rng.standard_normal((m, k)))
            t = orthonormalize(rng.standard_normal((m, k)))
            angles = principal_angles(s, t)
            chordal_angles = math.sqrt(float(np.sum(np.sin(angles) ** 2)))
            fs_angles = math.acos(min(float(np.prod(np.cos(angles))), 1.0))
            worst_chordal = max(
                worst_chordal,
                abs(distance(s, t, Metric.CHORDAL) - chordal_angles),
            )
            worst_fs = max(
                worst_fs, abs(distance(s, t, Metric.FUBINI_STUDY) - fs_angles)
            )
            q, r = np.linalg.qr(rng.standard_normal((k, k)))
            rotated = Subspace(s.basis @ (q * np.sign(np.diag(r))))
            for metric in Metric:
                worst_invariance = max(
                    worst_invariance,
                    abs(distance(rotated, t, metric) - distance(s, t, metric)),
                )
        _report(
            f"metric consistency G({m},{k})",
            worst_chordal <= 1e-9 and worst_fs <= 1e-9 and worst_invariance <= 1e-9,
            f"chordal {worst_chordal:.2e}, fs {worst_fs:.2e}, "
            f"invariance {worst_invariance:.2e} (all <= 1e-9, {self.pairs} pairs)",
        )


# ---------------------------------------------------------------------------
# criterion 4: export invariants
# ---------------------------------------------------------------------------


class TestExportInvariants:
    layouts = [
        (9, 1, 32, 3, 3),
        (9, 3, 32, 3, 3),
        (49, 3, 64, 7, 7),
    ]

    @pytest.mark.parametrize("layout", layouts, ids=lambda l: f"G({l[0]},{l[1]})xN{l[2]}")
    def test_raw_norms_exactly_sqrt_k(self, layout):
        m, k, n, h, w = layout
        cb = random_codebook(PackingProblem(m=m, k=k, n=n, metric=Metric.CHORDAL, seed=3))
        tensor = export_kernels(cb, ExportConfig(height=h, width=w))
        norms = np.linalg.norm(tensor.values.reshape(n, -1), axis=1)
        spread = float(norms.max() - norms.min())
        worst = float(np.abs(norms - math.sqrt(k)).max())
        _report(
            f"raw norms G({m},{k}) N={n}",
            worst <= 1e-12 and spread <= 1e-12,
            f"max |norm - sqrt({k})| = {worst:.2e}, spread {spread:.2e} (<= 1e-12)",
        )

    def test_kaiming_direction_preservation(self):
        cb = random_codebook(PackingProblem(m=9, k=3, n=32, metric=Metric.CHORDAL, seed=5))
        raw = export_kernels(cb, ExportConfig(height=3, width=3))
        scaled = export_kernels(
            cb, ExportConfig(height=3, width=3, scale_mode=ScaleMode.KAIMING)
        )
        worst = 0.0
        for i in range(32):
            a = raw.values[i].ravel()
            b = scaled.values[i].ravel()
            cosine = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
            worst = max(worst, abs(cosine - 1.0))
        _report(
            "kaiming direction preservation",
            worst <= 1e-12,
            f"max |cos - 1| = {worst:.2e} <= 1e-12",
        )

    def test_file_round_trip_bit_exact(self, tmp_path):
        cb = random_codebook(PackingProblem(m=9, k=3, n=32, metric=Metric.FUBINI_STUDY, seed=8))
        cb_path = tmp_path / "cb.gpk"
        write_codebook(cb, cb_path)
        loaded = read_codebook(cb_path)
        bases_exact = all(
            np.array_equal(a.basis, b.basis)
            for a, b in zip(cb.subspaces, loaded.subspaces)
        )
        tensor = export_kernels(cb, ExportConfig(height=3, width=3))
        k_path = tmp_path / "k.bin"
        write_kernels(tensor, k_path)
        kernels_exact = np.array_equal(read_kernels(k_path).values, tensor.values)
        _report(
            "file round trip",
            bases_exact and kernels_exact,
            f"codebook bit-exact: {bases_exact}, kernel tensor bit-exact: {kernels_exact}",
        )
