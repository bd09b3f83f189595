"""End-to-end CLI flows and the exit-code contract."""

import subprocess
import sys

import numpy as np
import pytest

from grasspack.cli import main
from grasspack.codebook_io import read_codebook, read_kernels


@pytest.fixture
def trine_file(tmp_path):
    path = tmp_path / "trine.gpk"
    code = main(
        [
            "gen", "--m", "2", "--k", "1", "--n", "3",
            "--metric", "chordal", "--seed", "7", "-o", str(path),
        ]
    )
    assert code == 0
    return path


class TestGen:
    def test_trine_quality(self, trine_file, capsys):
        codebook = read_codebook(trine_file)
        assert codebook.min_distance >= 0.8650

    def test_fs_metric_token(self, tmp_path):
        path = tmp_path / "fs.gpk"
        code = main(
            [
                "gen", "--m", "3", "--k", "1", "--n", "4", "--metric", "fs",
                "--restarts", "3", "--max-iters", "300", "--seed", "1",
                "-o", str(path),
            ]
        )
        assert code == 0
        assert read_codebook(path).problem.metric.value == "fs"

    def test_invalid_problem_is_runtime_error(self, tmp_path, capsys):
        code = main(
            ["gen", "--m", "2", "--k", "3", "--n", "4", "-o", str(tmp_path / "x.gpk")]
        )
        assert code == 2
        assert "error: InvalidProblem:" in capsys.readouterr().err

    def test_unknown_metric_is_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(
                [
                    "gen", "--m", "2", "--k", "1", "--n", "3",
                    "--metric", "geodesic", "-o", str(tmp_path / "x.gpk"),
                ]
            )
        assert exc.value.code == 1
        assert "error: usage:" in capsys.readouterr().err

    def test_missing_output_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "--m", "2", "--k", "1", "--n", "3"])
        assert exc.value.code == 1


class TestEval:
    def test_human_output_fields(self, trine_file, capsys):
        assert main(["eval", str(trine_file)]) == 0
        out = capsys.readouterr().out
        for key in ("m:", "k:", "n:", "metric:", "min_distance:", "rankin_bound:"):
            assert key in out
        assert "bin_start,bin_end,count" in out

    def test_csv_output(self, trine_file, capsys):
        assert main(["eval", str(trine_file), "--csv"]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == "key,value"
        keys = {line.split(",", 1)[0] for line in lines[1:] if line and "," in line}
        assert {"m", "k", "n", "metric", "min_distance", "rankin_bound"} <= keys

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        assert main(["eval", str(tmp_path / "absent.gpk")]) == 2
        assert "error: IoFailure:" in capsys.readouterr().err

    def test_non_codebook_file(self, tmp_path, capsys):
        junk = tmp_path / "junk.gpk"
        junk.write_bytes(b"this is not a codebook, definitely not")
        assert main(["eval", str(junk)]) == 2
        assert "error: MalformedFile:" in capsys.readouterr().err

    def test_plot_written(self, trine_file, tmp_path, capsys):
        plot_dir = tmp_path / "figs"
        assert main(["eval", str(trine_file), "--plot-dir", str(plot_dir)]) == 0
        images = list(plot_dir.glob("*_distances.png"))
        assert len(images) == 1
        assert images[0].stat().st_size > 0


class TestExport:
    def test_valid_geometry(self, trine_file, tmp_path, capsys):
        out = tmp_path / "k.bin"
        # 1*2 == m == 2, so this passes the precondition
        assert main(
            ["export", str(trine_file), "--height", "1", "--width", "2", "-o", str(out)]
        ) == 0
        tensor = read_kernels(out)
        assert tensor.values.shape == (3, 1, 1, 2)

    def test_shape_mismatch_is_runtime_error(self, trine_file, tmp_path, capsys):
        code = main(
            [
                "export", str(trine_file), "--height", "1", "--width", "3",
                "-o", str(tmp_path / "k.bin"),
            ]
        )
        assert code == 2
        assert "error: ShapeMismatch:" in capsys.readouterr().err

    def test_kaiming_csv_export(self, trine_file, tmp_path, capsys):
        out = tmp_path / "k.csv"
        assert main(
            [
                "export", str(trine_file), "--height", "1", "--width", "2",
                "--scale", "kaiming", "--csv", "-o", str(out),
            ]
        ) == 0
        header = out.read_text().splitlines()[0]
        assert header == "out_channel,in_channel,row,col,value"


class TestStats:
    def test_csv_rows_per_kernel(self, trine_file, tmp_path, capsys):
        kernels = tmp_path / "k.bin"
        main(["export", str(trine_file), "--height", "1", "--width", "2", "-o", str(kernels)])
        capsys.readouterr()
        assert main(["stats", str(kernels), "--csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "index,mean,variance,norm,is_sparse"
        assert len(lines) == 4  # header + one row per kernel
        for line in lines[1:]:
            assert line.endswith(",0")  # no sparse kernels in a raw export

    def test_accepts_codebook_directly(self, trine_file, capsys):
        assert main(["stats", str(trine_file)]) == 0
        out = capsys.readouterr().out
        assert "kernels: 3" in out
        assert "sparse kernels: 0" in out

    def test_plot_written(self, trine_file, tmp_path, capsys):
        plot_dir = tmp_path / "figs"
        assert main(["stats", str(trine_file), "--plot-dir", str(plot_dir)]) == 0
        images = list(plot_dir.glob("*_kernel_stats.png"))
        assert len(images) == 1

    def test_explicit_threshold(self, trine_file, capsys):
        assert main(["stats", str(trine_file), "--threshold", "5.0", "--csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        for line in lines[1:]:
            assert line.endswith(",1")  # every unit-norm kernel is below 5.0


def test_console_invocation_smoke(tmp_path):
    result = subprocess.run(
        [
            sys.executable, "-m", "grasspack.cli",
            "gen", "--m", "2", "--k", "1", "--n", "2",
            "--restarts", "2", "--max-iters", "100",
            "-o", str(tmp_path / "cb.gpk"),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "wrote" in result.stdout
