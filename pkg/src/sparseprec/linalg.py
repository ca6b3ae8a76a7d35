"""Dense symmetric matrices and the handful of kernels everything else uses.

All functions accept either a :class:`SymMatrix` or a plain square ndarray;
matrix-valued results come back as :class:`SymMatrix`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidParameter, NotConverged, NotPositiveDefinite


class SymMatrix:
    """Immutable dense symmetric ``p x p`` matrix of finite floats.

    Symmetry is checked with exact equality. Data that is only symmetric up to
    round-off (read from a file, product of matrices) should go through
    :meth:`SymMatrix.symmetrize`.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidParameter("matrix has non-finite entries")
        if not np.array_equal(a, a.T):
            raise InvalidParameter("matrix is not exactly symmetric; use SymMatrix.symmetrize")
        a.setflags(write=False)
        self._a = a

    @classmethod
    def symmetrize(cls, entries) -> "SymMatrix":
        """Build from ``(a + a.T) / 2``."""
        a = np.asarray(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        return cls(0.5 * (a + a.T))

    @classmethod
    def identity(cls, p: int) -> "SymMatrix":
        return cls(np.eye(p))

    @classmethod
    def diag(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the entries."""
        return self._a

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._a
        return self._a.astype(dtype)

    def __getitem__(self, idx):
        return self._a[idx]

    def __eq__(self, other):
        if isinstance(other, SymMatrix):
            return np.array_equal(self._a, other._a)
        return NotImplemented

    def __hash__(self):
        return hash(self._a.tobytes())

    def __add__(self, other):
        return SymMatrix(self._a + as_array(other))

    def __sub__(self, other):
        return SymMatrix(self._a - as_array(other))

    def __mul__(self, scalar):
        return SymMatrix(self._a * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SymMatrix(-self._a)

    def __repr__(self):
        return f"SymMatrix(dim={self.dim})\n{self._a!r}"


def as_array(a) -> np.ndarray:
    if isinstance(a, SymMatrix):
        return a.array
    return np.asarray(a, dtype=np.float64)


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def cholesky(a) -> CholeskyFactor:
    """Lower Cholesky factor of a positive-definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    arr = as_array(a)
    try:
        lower = np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if not np.all(np.diag(lower) > 0):
        raise NotPositiveDefinite("non-positive pivot in Cholesky factor")
    lower.setflags(write=False)
    return CholeskyFactor(lower)


def log_det(a) -> float:
    """``log det(a)`` computed as twice the sum of log Cholesky pivots."""
    lower = cholesky(a).lower
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def inverse_spd(a) -> SymMatrix:
    """Inverse of a positive-definite matrix, symmetrized."""
    arr = as_array(a)
    lower = cholesky(arr).lower
    inv = scipy.linalg.cho_solve((lower, True), np.eye(arr.shape[0]))
    return SymMatrix.symmetrize(inv)


def norm_elem_max(a) -> float:
    """Largest absolute entry."""
    arr = as_array(a)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def norm_linf_op(a) -> float:
    """Induced l_inf operator norm: largest absolute row sum."""
    # contiguous copy so the summation order does not depend on memory layout
    return float(np.max(np.sum(np.ascontiguousarray(np.abs(as_array(a))), axis=1)))


def norm_frobenius(a) -> float:
    return float(np.sqrt(np.sum(as_array(a) ** 2)))


def norm_spectral(a) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    arr = as_array(a)
    try:
        eigs = scipy.linalg.eigvalsh(arr, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotConverged(f"symmetric eigensolver failed: {exc}") from None
    return float(np.max(np.abs(eigs)))


def read_matrix_csv(path: str | os.PathLike, symmetrize: bool = False) -> SymMatrix:
    """Read a square matrix written as comma-separated rows.

    A single leading line starting with ``#`` is treated as a header.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            if lineno == 0 and line.startswith("#"):
                continue
            rows.append([float(x) for x in line.split(",")])
    arr = np.array(rows, dtype=np.float64)
    return SymMatrix.symmetrize(arr) if symmetrize else SymMatrix(arr)


def write_matrix_csv(a, path: str | os.PathLike, header: str | None = None) -> None:
    arr = as_array(a)
    with open(path, "w") as fh:
        if header is not None:
            fh.write("# " + header.lstrip("# ") + "\n")
        for row in arr:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
