"""Command-line interface: gen, eval, export, stats.

Exit codes: 0 success, 1 usage error, 2 runtime error. Runtime errors are
printed to stderr as ``error: <Kind>: <message>``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, codebook_io, packing, plots
from .errors import GrasspackError
from .geometry import Metric

_USAGE_EXIT = 1
_RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the CLI contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_USAGE_EXIT, f"error: usage: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="grasspack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="optimize a packing and write a codebook file")
    gen.add_argument("--m", type=int, required=True, help="ambient dimension")
    gen.add_argument("--k", type=int, required=True, help="subspace dimension")
    gen.add_argument("--n", type=int, required=True, help="codebook size N")
    gen.add_argument("--metric", type=Metric.parse, default=Metric.CHORDAL,
                     help="chordal or fs (default: chordal)")
    gen.add_argument("--restarts", type=int, default=20)
    gen.add_argument("--max-iters", type=int, default=2000)
    gen.add_argument("--tol", type=float, default=1e-8)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True, help="codebook file to write")

    evaluate = sub.add_parser("eval", help="print a codebook's manifest and distance stats")
    evaluate.add_argument("file", help="codebook file")
    evaluate.add_argument("--csv", action="store_true", help="machine-readable output")
    evaluate.add_argument("--plot-dir", help="also render the distance histogram here")

    export = sub.add_parser("export", help="export a codebook as a conv kernel tensor")
    export.add_argument("file", help="codebook file")
    export.add_argument("--height", type=int, required=True)
    export.add_argument("--width", type=int, required=True)
    export.add_argument("--scale", type=codebook_io.ScaleMode.parse,
                        default=codebook_io.ScaleMode.RAW, help="raw or kaiming")
    export.add_argument("--csv", action="store_true", help="write CSV instead of binary")
    export.add_argument("-o", "--output", required=True, help="kernel file to write")

    stats = sub.add_parser("stats", help="per-kernel mean/variance/norm report")
    stats.add_argument("file", help="kernel export (binary or CSV) or codebook file")
    stats.add_argument("--threshold", type=float, default=None,
                       help="absolute sparsity cutoff (default: 1e-2 x median norm)")
    stats.add_argument("--csv", action="store_true", help="machine-readable output")
    stats.add_argument("--plot-dir", help="also render the stat distributions here")
    return parser


def _cmd_gen(args) -> int:
    problem = packing.PackingProblem(
        m=args.m,
        k=args.k,
        n=args.n,
        metric=args.metric,
        restarts=args.restarts,
        max_iters=args.max_iters,
        tolerance=args.tol,
        seed=args.seed,
    )
    codebook = packing.optimize(problem)
    codebook_io.write_codebook(codebook, args.output)
    print(f"wrote {args.output}")
    print(f"G({problem.m},{problem.k}) N={problem.n} metric={problem.metric.value}")
    if codebook.min_distance is not None:
        print(f"min_distance: {codebook.min_distance:.10f}")
        print(
            f"rankin_bound: {codebook.rankin_bound:.10f} "
            f"(generalized: {codebook.rankin_bound_generalized:.10f})"
        )
    print(f"iterations: {codebook.iterations_used} converged: {codebook.converged}")
    return 0


def _histogram_rows(spectrum: np.ndarray, bins: int = 16) -> list[tuple[float, float, int]]:
    counts, edges = np.histogram(spectrum, bins=bins)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i]))
        for i in range(len(counts))
    ]


def _cmd_eval(args) -> int:
    codebook = codebook_io.read_codebook(args.file)
    problem = codebook.problem
    fields = [
        ("file", args.file),
        ("m", problem.m),
        ("k", problem.k),
        ("n", problem.n),
        ("metric", problem.metric.value),
        ("seed", problem.seed),
        ("min_distance", codebook.min_distance),
        ("rankin_bound", codebook.rankin_bound),
        ("rankin_bound_generalized", codebook.rankin_bound_generalized),
        ("iterations_used", codebook.iterations_used),
        ("converged", codebook.converged),
    ]
    spectrum = None
    if problem.n >= 2:
        spectrum = analysis.distance_spectrum(codebook, problem.metric)
        fields += [
            ("pair_count", len(spectrum)),
            ("mean_distance", float(np.mean(spectrum))),
            ("max_distance", float(np.max(spectrum))),
        ]
    if args.csv:
        print("key,value")
        for key, value in fields:
            print(f"{key},{value}")
    else:
        for key, value in fields:
            print(f"{key}: {value}")
    if spectrum is not None:
        print()
        print("bin_start,bin_end,count")
        for start, end, count in _histogram_rows(spectrum):
            print(f"{start!r},{end!r},{count}")
    if args.plot_dir and spectrum is not None:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        target = out / f"{Path(args.file).stem}_distances.png"
        plots.save_distance_histogram(
            spectrum,
            codebook.min_distance,
            codebook.rankin_bound_generalized,
            target,
            title=f"G({problem.m},{problem.k}) N={problem.n} {problem.metric.value}",
        )
        print(f"\nwrote {target}", file=sys.stderr)
    return 0


def _cmd_export(args) -> int:
    codebook = codebook_io.read_codebook(args.file)
    config = codebook_io.ExportConfig(
        height=args.height, width=args.width, scale_mode=args.scale
    )
    tensor = codebook_io.export_kernels(codebook, config)
    if args.csv:
        codebook_io.write_kernels_csv(tensor, args.output)
    else:
        codebook_io.write_kernels(tensor, args.output)
    norms = np.linalg.norm(tensor.values.reshape(tensor.out_channels, -1), axis=1)
    print(f"wrote {args.output}")
    print(
        f"shape: {tensor.out_channels}x{tensor.in_channels}"
        f"x{tensor.height}x{tensor.width} scale: {tensor.scale_mode.value}"
    )
    print(f"per-kernel norm: {norms[0]:.10f} (spread {norms.max() - norms.min():.3e})")
    return 0


def _load_tensor(path: str) -> codebook_io.KernelTensor:
    """Accept a kernel export (binary or CSV) or a codebook file."""
    if path.endswith(".csv"):
        return codebook_io.read_kernels_csv(path)
    try:
        head = Path(path).read_bytes()[:6]
    except OSError as exc:
        raise GrasspackError(f"cannot read {path}: {exc}") from exc
    if head == b"GPKCBK":
        codebook = codebook_io.read_codebook(path)
        config = codebook_io.ExportConfig(height=codebook.problem.m, width=1)
        return codebook_io.export_kernels(codebook, config)
    return codebook_io.read_kernels(path)


def _cmd_stats(args) -> int:
    tensor = _load_tensor(args.file)
    config = analysis.SparsityConfig(norm_threshold=args.threshold)
    stats = analysis.compute_stats(tensor, config)
    if args.csv:
        print("index,mean,variance,norm,is_sparse")
        for i in range(stats.n):
            sparse = int(stats.per_kernel_norm[i] <= stats.threshold)
            print(
                f"{i},{stats.per_kernel_mean[i]!r},{stats.per_kernel_variance[i]!r},"
                f"{stats.per_kernel_norm[i]!r},{sparse}"
            )
    else:
        print(f"kernels: {stats.n}")
        print(f"sparsity threshold: {stats.threshold:.6e}")
        print(f"sparse kernels: {stats.sparse_count}")
        for name in ("mean", "variance", "norm"):
            s = stats.summary[name]
            print(
                f"{name:>8}: min {s['min']:+.6e}  max {s['max']:+.6e}  "
                f"mean {s['mean']:+.6e}  std {s['std']:.6e}"
            )
    if args.plot_dir:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        target = out / f"{Path(args.file).stem}_kernel_stats.png"
        plots.save_kernel_stats_panels(stats, target, title=Path(args.file).name)
        print(f"\nwrote {target}", file=sys.stderr)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "eval": _cmd_eval,
    "export": _cmd_export,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GrasspackError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT
    except OSError as exc:
        print(f"error: IoFailure: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
