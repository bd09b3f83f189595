"""Codebook persistence and conv-kernel export.

Codebook file layout (one self-contained binary artifact):

    bytes 0..5   magic  b"GPKCBK"
    bytes 6..7   version b"01" (unknown versions are rejected)
    bytes 8..11  manifest length, 32-bit little-endian unsigned
    manifest     UTF-8 JSON (dimensions, metric, seed, achieved quality)
    payload      N * m * k IEEE-754 float64, little-endian,
                 subspace-major, column-major within each basis

Kernel export layout: four 32-bit little-endian dims (out, in, height,
width) followed by the float64 little-endian values in
out-in-height-width order; or a plain-text CSV with one value per row.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptBasis, IoFailure, MalformedFile, ShapeMismatch
from .geometry import Metric, Subspace, stack_bases
from .packing import Codebook, PackingProblem

_MAGIC = b"GPKCBK"
_VERSION = b"01"
_HEADER_LEN = len(_MAGIC) + len(_VERSION) + 4

_MANIFEST_FIELDS = (
    "format_version",
    "m",
    "k",
    "n",
    "metric",
    "seed",
    "min_distance",
    "rankin_bound",
    "rankin_bound_generalized",
    "restarts",
    "max_iters",
    "tolerance",
    "iterations_used",
    "converged",
)


@dataclass(frozen=True)
class CodebookFile:
    """Parsed on-disk form of a codebook: manifest dict plus flat payload."""

    manifest: dict
    payload: np.ndarray


def _manifest_for(codebook: Codebook) -> dict:
    problem = codebook.problem
    return {
        "format_version": 1,
        "m": problem.m,
        "k": problem.k,
        "n": problem.n,
        "metric": problem.metric.value,
        "seed": problem.seed,
        "min_distance": codebook.min_distance,
        "rankin_bound": codebook.rankin_bound,
        "rankin_bound_generalized": codebook.rankin_bound_generalized,
        "restarts": problem.restarts,
        "max_iters": problem.max_iters,
        "tolerance": problem.tolerance,
        "iterations_used": codebook.iterations_used,
        "converged": codebook.converged,
    }


def _payload_for(codebook: Codebook) -> np.ndarray:
    return np.concatenate(
        [np.asarray(s.basis).ravel(order="F") for s in codebook.subspaces]
    )


def write_codebook(codebook: Codebook, destination) -> CodebookFile:
    """Write a codebook to ``destination`` and return its file form.

    Raises
    ------
    IoFailure
        If the underlying write fails.
    """
    manifest = _manifest_for(codebook)
    payload = _payload_for(codebook)
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    blob = (
        _MAGIC
        + _VERSION
        + len(manifest_bytes).to_bytes(4, "little")
        + manifest_bytes
        + payload.astype("<f8").tobytes()
    )
    try:
        Path(destination).write_bytes(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc
    return CodebookFile(manifest=manifest, payload=payload)


def _parse_header(data: bytes, source) -> tuple[dict, np.ndarray]:
    if len(data) < _HEADER_LEN:
        raise MalformedFile(f"{source}: too short for a codebook header")
    if data[:6] != _MAGIC:
        raise MalformedFile(f"{source}: bad magic {data[:6]!r}")
    if data[6:8] != _VERSION:
        raise MalformedFile(f"{source}: unsupported version {data[6:8]!r}")
    manifest_len = int.from_bytes(data[8:12], "little")
    if len(data) < _HEADER_LEN + manifest_len:
        raise MalformedFile(f"{source}: manifest truncated")
    try:
        manifest = json.loads(data[_HEADER_LEN : _HEADER_LEN + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"{source}: manifest is not valid JSON: {exc}") from exc
    missing = [f for f in _MANIFEST_FIELDS if f not in manifest]
    if missing:
        raise MalformedFile(f"{source}: manifest missing fields {missing}")
    payload_bytes = data[_HEADER_LEN + manifest_len :]
    expected = manifest["n"] * manifest["m"] * manifest["k"] * 8
    if len(payload_bytes) != expected:
        raise MalformedFile(
            f"{source}: payload holds {len(payload_bytes)} bytes, expected {expected}"
        )
    payload = np.frombuffer(payload_bytes, dtype="<f8")
    return manifest, payload


def read_codebook(source) -> Codebook:
    """Read a codebook file, re-verifying its invariants.

    Raises
    ------
    IoFailure
        If the file cannot be read.
    MalformedFile
        On bad magic, unknown version, truncation, or a manifest that
        disagrees with the payload.
    CorruptBasis
        If a stored basis fails the orthonormality check beyond 1e-8.
    """
    try:
        data = Path(source).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {source}: {exc}") from exc
    manifest, payload = _parse_header(data, source)
    m, k, n = manifest["m"], manifest["k"], manifest["n"]
    try:
        problem = PackingProblem(
            m=m,
            k=k,
            n=n,
            metric=Metric.parse(manifest["metric"]),
            restarts=manifest["restarts"],
            max_iters=manifest["max_iters"],
            tolerance=manifest["tolerance"],
            seed=manifest["seed"],
        )
    except Exception as exc:
        raise MalformedFile(f"{source}: invalid manifest: {exc}") from exc
    subspaces = []
    for i in range(n):
        basis = payload[i * m * k : (i + 1) * m * k].reshape((m, k), order="F")
        defect = float(np.abs(basis.T @ basis - np.eye(k)).max())
        if defect > 1e-8:
            raise CorruptBasis(
                f"{source}: subspace {i} fails orthonormality by {defect:.3e}"
            )
        try:
            subspaces.append(Subspace(basis))
        except ValueError as exc:
            raise CorruptBasis(f"{source}: subspace {i}: {exc}") from exc
    codebook = Codebook.from_subspaces(
        problem,
        subspaces,
        iterations_used=manifest["iterations_used"],
        converged=manifest["converged"],
    )
    stored = manifest["min_distance"]
    if codebook.min_distance is None:
        if stored is not None:
            raise MalformedFile(f"{source}: single-subspace file stores a min_distance")
    elif stored is None or abs(stored - codebook.min_distance) > 1e-9:
        raise MalformedFile(
            f"{source}: manifest min_distance {stored!r} disagrees with "
            f"recomputed {codebook.min_distance!r}"
        )
    return codebook


# ---------------------------------------------------------------------------
# kernel tensors
# ---------------------------------------------------------------------------


class ScaleMode(enum.Enum):
    """Magnitude convention for exported kernels."""

    RAW = "raw"
    KAIMING = "kaiming"

    @classmethod
    def parse(cls, token: str) -> "ScaleMode":
        normalized = token.strip().lower()
        for mode in cls:
            if normalized == mode.value:
                return mode
        raise ValueError(f"unknown scale mode {token!r}: expected 'raw' or 'kaiming'")


@dataclass(frozen=True)
class ExportConfig:
    """Kernel geometry: height * width must equal the codebook's m."""

    height: int
    width: int
    scale_mode: ScaleMode = ScaleMode.RAW
    # v1 fixes the axis order; kept explicit so files are self-describing.
    layout: str = "oihw"

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ShapeMismatch(
                f"kernel geometry must be positive, got {self.height}x{self.width}"
            )
        if self.layout != "oihw":
            raise ShapeMismatch(f"unsupported layout {self.layout!r}")


def kaiming_factor(in_channels: int, height: int, width: int) -> float:
    """sqrt(2 / fan_in) with conv fan-in = in_channels * height * width."""
    return math.sqrt(2.0 / (in_channels * height * width))


@dataclass(frozen=True)
class KernelTensor:
    """4-D conv weight block in out-in-height-width order.

    In RAW mode each output channel, flattened per input channel, is an
    orthonormal set of vectors (so its Frobenius norm is exactly
    sqrt(in_channels)); KAIMING mode is the same tensor times
    sqrt(2 / fan_in).
    """

    values: np.ndarray
    scale_mode: ScaleMode

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 4:
            raise ShapeMismatch(f"kernel tensor must be 4-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ShapeMismatch("kernel tensor contains non-finite values")
        if self.scale_mode is ScaleMode.RAW and values.size:
            n, k, h, w = values.shape
            flat = values.reshape(n, k, h * w)
            gram = np.einsum("npa,nqa->npq", flat, flat)
            defect = float(np.abs(gram - np.eye(k)).max())
            if defect > 1e-10:
                raise ShapeMismatch(
                    f"raw kernels are not orthonormal bases (defect {defect:.3e})"
                )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def out_channels(self) -> int:
        return self.values.shape[0]

    @property
    def in_channels(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[2]

    @property
    def width(self) -> int:
        return self.values.shape[3]


def export_kernels(codebook: Codebook, config: ExportConfig) -> KernelTensor:
    """Map a codebook onto a conv weight tensor.

    Output channel i, input channel j holds column j of subspace i's
    basis, reshaped row-major to height x width and multiplied by the
    scale factor (1 for RAW, sqrt(2/fan_in) for KAIMING).

    Raises
    ------
    ShapeMismatch
        If height * width does not equal the codebook's ambient dimension.
    """
    m = codebook.problem.m
    if config.height * config.width != m:
        raise ShapeMismatch(
            f"kernel geometry {config.height}x{config.width} does not cover "
            f"the ambient dimension m={m}"
        )
    bases = stack_bases(codebook.subspaces)  # (N, m, k)
    n, _, k = bases.shape
    values = bases.transpose(0, 2, 1).reshape(n, k, config.height, config.width)
    if config.scale_mode is ScaleMode.KAIMING:
        values = values * kaiming_factor(k, config.height, config.width)
    return KernelTensor(values=values, scale_mode=config.scale_mode)


def kernels_to_bases(tensor: KernelTensor) -> np.ndarray:
    """Invert the export reshape back to stacked (N, m, k) bases.

    Exact (bit-level) for RAW tensors; KAIMING tensors are unscaled
    first, which reintroduces one rounding step.
    """
    n, k, h, w = tensor.values.shape
    values = tensor.values
    if tensor.scale_mode is ScaleMode.KAIMING:
        values = values / kaiming_factor(k, h, w)
    return values.reshape(n, k, h * w).transpose(0, 2, 1)


def write_kernels(tensor: KernelTensor, destination) -> None:
    """Write the binary kernel layout: four u32 LE dims, then f64 LE values."""
    header = b"".join(
        int(d).to_bytes(4, "little") for d in tensor.values.shape
    )
    try:
        Path(destination).write_bytes(header + tensor.values.astype("<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc


def read_kernels(source) -> KernelTensor:
    """Read a binary kernel file written by `write_kernels`.

    The layout carries no scale flag; tensors whose kernels re-validate
    as orthonormal bases load as RAW, anything else as KAIMING.
    """
    try:
        data = Path(source).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {source}: {exc}") from exc
    if len(data) < 16:
        raise MalformedFile(f"{source}: too short for a kernel header")
    dims = tuple(int.from_bytes(data[i : i + 4], "little") for i in range(0, 16, 4))
    expected = 16 + int(np.prod(dims)) * 8
    if any(d < 1 for d in dims) or len(data) != expected:
        raise MalformedFile(
            f"{source}: dims {dims} inconsistent with {len(data)} bytes"
        )
    values = np.frombuffer(data[16:], dtype="<f8").reshape(dims)
    try:
        return KernelTensor(values=values, scale_mode=ScaleMode.RAW)
    except ShapeMismatch:
        return KernelTensor(values=values, scale_mode=ScaleMode.KAIMING)


def write_kernels_csv(tensor: KernelTensor, destination) -> None:
    """Plain-text form: one row per value, indexed by all four axes."""
    try:
        with open(destination, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["out_channel", "in_channel", "row", "col", "value"])
            n, k, h, w = tensor.values.shape
            for i in range(n):
                for j in range(k):
                    for r in range(h):
                        for c in range(w):
                            writer.writerow(
                                [i, j, r, c, repr(float(tensor.values[i, j, r, c]))]
                            )
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc


def read_kernels_csv(source) -> KernelTensor:
    """Read the CSV kernel layout back into a tensor."""
    try:
        with open(source, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise IoFailure(f"cannot read {source}: {exc}") from exc
    if not rows or rows[0] != ["out_channel", "in_channel", "row", "col", "value"]:
        raise MalformedFile(f"{source}: missing kernel CSV header")
    try:
        entries = [
            (int(i), int(j), int(r), int(c), float(v)) for i, j, r, c, v in rows[1:]
        ]
    except (ValueError, TypeError) as exc:
        raise MalformedFile(f"{source}: bad kernel CSV row: {exc}") from exc
    if not entries:
        raise MalformedFile(f"{source}: no kernel values")
    dims = tuple(max(e[axis] for e in entries) + 1 for axis in range(4))
    if len(entries) != int(np.prod(dims)):
        raise MalformedFile(f"{source}: expected {int(np.prod(dims))} values, got {len(entries)}")
    values = np.zeros(dims)
    for i, j, r, c, v in entries:
        values[i, j, r, c] = v
    try:
        return KernelTensor(values=values, scale_mode=ScaleMode.RAW)
    except ShapeMismatch:
        return KernelTensor(values=values, scale_mode=ScaleMode.KAIMING)
