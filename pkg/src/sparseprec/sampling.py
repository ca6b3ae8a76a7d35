"""Gaussian sampling, sample covariance, and the noise-deviation checks.

Random streams are derived from a root seed plus a tuple of labels, so that
``(root, labels)`` pins the draws no matter which worker executes them.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .linalg import SymMatrix, as_array, cholesky
from .models import ModelSpec


def _label_word(label) -> int:
    digest = hashlib.sha256(repr(label).encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass(frozen=True)
class Seed:
    """Root seed plus a path of stream labels.

    >>> a = Seed(7).child("chain", 3)
    >>> b = Seed(7).child("chain", 3)
    >>> a.generator().standard_normal() == b.generator().standard_normal()
    True
    """

    root: int
    labels: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.root) < 2**64:
            raise InvalidParameter("seed root must be a 64-bit unsigned integer")

    def child(self, *labels) -> "Seed":
        return Seed(self.root, self.labels + tuple(labels))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.root), spawn_key=tuple(_label_word(x) for x in self.labels))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class Dataset:
    """``n`` observations (rows) of a ``p``-dimensional vector."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InvalidParameter("dataset needs at least one row")
        if not np.all(np.isfinite(rows)):
            raise InvalidParameter("dataset has non-finite entries")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def to_csv(self, path: str | os.PathLike) -> None:
        np.savetxt(path, self.rows, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "Dataset":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2, comments="#"))


def sample_gaussian(model: ModelSpec, n: int, seed: Seed) -> Dataset:
    """Draw ``n`` i.i.d. zero-mean rows with covariance ``model.sigma_star``."""
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    lower = cholesky(model.sigma_star).lower
    z = seed.generator().standard_normal((n, model.p))
    return Dataset(z @ lower.T)


def sample_covariance(data: Dataset, center: bool = False) -> SymMatrix:
    """``(1/n) sum_k x_k x_k^T``.

    No mean is subtracted unless ``center=True``; the estimator assumes
    zero-mean data.
    """
    x = data.rows
    if center:
        x = x - x.mean(axis=0)
    return SymMatrix.symmetrize(x.T @ x / x.shape[0])


def noise_matrix(sigma_hat, model: ModelSpec) -> SymMatrix:
    """Effective noise ``sigma_hat - inv(theta_star)``."""
    s = as_array(sigma_hat)
    if s.shape != (model.p, model.p):
        raise DimensionMismatch(f"sigma_hat has shape {s.shape}, model has p={model.p}")
    return SymMatrix.symmetrize(s - model.sigma_star.array)


def subgaussian_tail_bound(n: int, delta: float, max_var: float, sigma: float = 1.0) -> float:
    """Entrywise deviation bound ``4 exp(-n delta^2 / (128 (1+4 sigma^2)^2 max_var^2))``."""
    return 4.0 * math.exp(-n * delta**2 / (128.0 * (1.0 + 4.0 * sigma**2) ** 2 * max_var**2))


@dataclass(frozen=True)
class TailCheckRow:
    delta: float
    emp_rate: float
    bound: float
    trials: int

    @property
    def std_error(self) -> float:
        """Binomial standard error at the bound (floored at one count)."""
        q = min(max(self.bound, 1.0 / self.trials), 1.0)
        return math.sqrt(q * (1 - q) / self.trials) if q < 1 else 0.0


def empirical_tail_check(
    model: ModelSpec, n: int, delta_grid, trials: int, seed: Seed, sigma: float = 1.0
) -> list[TailCheckRow]:
    """Compare entrywise exceedance frequencies of ``|S_hat - Sigma*|`` with the sub-Gaussian bound.

    For each ``delta`` the reported rate is the largest, over entries ``(i, j)``,
    of the fraction of trials with ``|S_hat_ij - Sigma*_ij| > delta``.
    """
    max_var = model.max_variance
    ceiling = max_var * 8.0 * (1.0 + 4.0 * sigma**2)
    deltas = [float(d) for d in delta_grid]
    for d in deltas:
        if not 0 < d < ceiling:
            raise InvalidParameter(f"delta={d} outside the bound's validity range (0, {ceiling})")
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    counts = np.zeros((len(deltas), model.p, model.p))
    for t in range(trials):
        data = sample_gaussian(model, n, seed.child("tail", t))
        dev = np.abs(noise_matrix(sample_covariance(data), model).array)
        for k, d in enumerate(deltas):
            counts[k] += dev > d
    return [
        TailCheckRow(d, float(counts[k].max() / trials), subgaussian_tail_bound(n, d, max_var, sigma), trials)
        for k, d in enumerate(deltas)
    ]


def write_tail_csv(rows: list[TailCheckRow], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "emp_rate", "bound"])
        for r in rows:
            w.writerow([repr(r.delta), repr(r.emp_rate), repr(r.bound)])
