"""Finite sample ensembles standing in for random vectors.

A :class:`SampleEnsemble` holds ``N`` realizations of an ``m``-dimensional
random vector as the columns of an ``m x N`` matrix. Every outcome carries
probability ``1/N``, so expectations are plain column averages and all
identities between second moments hold to rounding error.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg_core import as_matrix

__all__ = [
    "DataError",
    "SampleEnsemble",
    "as_ensemble",
    "estimate_cov",
    "omega_norm_sq",
    "apply_matrix",
    "center",
    "load_csv",
    "save_csv",
]


class DataError(ValueError):
    """Malformed input data (shape mismatch, bad CSV, non-finite entries)."""


@dataclass(frozen=True, eq=False)
class SampleEnsemble:
    """Read-only ``dim x n_samples`` matrix of realizations."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise DataError(f"samples must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise DataError("an ensemble needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise DataError("samples contain NaN or Inf")
        arr = np.array(arr, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def dim(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def __repr__(self):
        return f"SampleEnsemble(dim={self.dim}, n_samples={self.n_samples})"

    def __sub__(self, other: "SampleEnsemble") -> "SampleEnsemble":
        _check_paired(self, other)
        return SampleEnsemble(self.samples - other.samples)

    def __add__(self, other: "SampleEnsemble") -> "SampleEnsemble":
        _check_paired(self, other)
        return SampleEnsemble(self.samples + other.samples)


def as_ensemble(x) -> SampleEnsemble:
    return x if isinstance(x, SampleEnsemble) else SampleEnsemble(x)


def _check_paired(x: SampleEnsemble, y: SampleEnsemble):
    if x.n_samples != y.n_samples:
        raise DataError(
            f"paired ensembles must share the sample count: "
            f"{x.n_samples} != {y.n_samples}"
        )


def _order_key(x: SampleEnsemble):
    return (x.dim, x.samples.tobytes())


def estimate_cov(x, y) -> np.ndarray:
    """Uncentered second moment ``E_xy = (1/N) X Y^T``.

    The product is always formed in one canonical operand order so that
    ``estimate_cov(x, y)`` and ``estimate_cov(y, x).T`` agree bit for bit.
    """
    x, y = as_ensemble(x), as_ensemble(y)
    _check_paired(x, y)
    n = x.n_samples
    if x is y or (x.samples.shape == y.samples.shape
                  and np.array_equal(x.samples, y.samples)):
        c = (x.samples @ x.samples.T) / n
        return 0.5 * (c + c.T)
    if _order_key(x) <= _order_key(y):
        return (x.samples @ y.samples.T) / n
    return ((y.samples @ x.samples.T) / n).T


def omega_norm_sq(x) -> float:
    """Mean squared Euclidean norm of the realizations, ``(1/N) ||X||_F^2``."""
    x = as_ensemble(x)
    return float(np.sum(x.samples * x.samples) / x.n_samples)


def apply_matrix(a, x) -> SampleEnsemble:
    """Apply ``a`` to every realization: column ``k`` becomes ``a @ x[:, k]``."""
    a = as_matrix(a, "a")
    x = as_ensemble(x)
    if a.shape[1] != x.dim:
        raise DataError(
            f"matrix with {a.shape[1]} columns cannot act on dim-{x.dim} ensemble"
        )
    return SampleEnsemble(a @ x.samples)


def center(x) -> tuple[SampleEnsemble, np.ndarray]:
    """Subtract the sample mean. Returns the centered ensemble and the mean.

    Nothing else in the package centers implicitly.
    """
    x = as_ensemble(x)
    mean = x.samples.mean(axis=1)
    return SampleEnsemble(x.samples - mean[:, None]), mean


def _parse_float(cell: str, row: int, col: int, path) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(
            f"{path}: non-numeric cell {cell!r} at row {row}, column {col}"
        ) from None
    if not np.isfinite(value):
        raise DataError(f"{path}: non-finite cell {cell!r} at row {row}, column {col}")
    return value


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, transpose: bool = False) -> SampleEnsemble:
    """Read an ensemble from a comma-separated file.

    By default each row is one vector component and each column one sample.
    With ``transpose=True`` rows are samples instead. A first row containing
    any non-numeric cell is taken as a header and skipped. Row and column
    numbers in error messages are 1-based and count the header.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    start = 0
    if not all(_is_number(c.strip()) for c in rows[0]):
        start = 1
        if len(rows) == 1:
            raise DataError(f"{path}: header row but no data")
    width = len(rows[start])
    values = []
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise DataError(
                f"{path}: ragged row {i}: {len(row)} cells, expected {width}"
            )
        values.append([_parse_float(c.strip(), i, j, path)
                       for j, c in enumerate(row, start=1)])
    arr = np.array(values, dtype=np.float64)
    return SampleEnsemble(arr.T if transpose else arr)


def save_csv(x, path, transpose: bool = False) -> None:
    """Write ``x`` with shortest round-trip float formatting (lossless)."""
    x = as_ensemble(x)
    arr = x.samples.T if transpose else x.samples
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
