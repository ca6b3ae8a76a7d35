"""Ground-truth Gaussian graphical models with exact covariance/concentration pairs.

Builders return a :class:`ModelSpec`. Where a closed form for the
concentration matrix exists (chain, star, grid) it is used directly so that
structural zeros are exact; otherwise zeros are snapped at ``zero_threshold``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, NotPositiveDefinite
from .linalg import SymMatrix, as_array, cholesky, inverse_spd

ZERO_THRESHOLD = 1e-8

Edge = tuple[int, int]


def canonical_edges(pairs) -> frozenset[Edge]:
    """Normalize an iterable of index pairs to ``(min, max)`` order, no self-loops."""
    out = set()
    for i, j in pairs:
        i, j = int(i), int(j)
        if i == j:
            raise InvalidParameter(f"self-loop ({i}, {i}) is not an edge")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def edges_of(theta, zero_threshold: float = ZERO_THRESHOLD) -> frozenset[Edge]:
    return frozenset(signed_edge_set(theta, zero_threshold))


def signed_edge_set(theta, zero_threshold: float = ZERO_THRESHOLD) -> dict[Edge, int]:
    """Map each off-diagonal pair ``i < j`` with ``|theta_ij| > zero_threshold`` to its sign."""
    if zero_threshold < 0:
        raise InvalidParameter("zero_threshold must be non-negative")
    a = as_array(theta)
    iu, ju = np.triu_indices(a.shape[0], k=1)
    vals = a[iu, ju]
    keep = np.abs(vals) > zero_threshold
    return {(int(i), int(j)): (1 if v > 0 else -1) for i, j, v in zip(iu[keep], ju[keep], vals[keep])}


@dataclass(frozen=True)
class ModelSpec:
    """A ground-truth model: true covariance, concentration matrix and graph statistics.

    ``degree_d`` counts the diagonal entry, so an isolated node has degree 1 and
    an interior chain node has degree 3. ``sparsity_s`` is the number of
    off-diagonal non-zeros of ``theta_star``, i.e. twice the edge count.
    """

    p: int
    family: str
    params: dict
    sigma_star: SymMatrix
    theta_star: SymMatrix
    edges: frozenset[Edge]
    degree_d: int
    sparsity_s: int
    theta_min: float
    zero_threshold: float = field(default=ZERO_THRESHOLD, compare=False)

    @property
    def signed_edges(self) -> dict[Edge, int]:
        return signed_edge_set(self.theta_star, self.zero_threshold)

    @property
    def max_variance(self) -> float:
        return float(np.max(np.diag(self.sigma_star.array)))

    def to_json_dict(self) -> dict:
        doc = {
            "p": self.p,
            "family": self.family,
            "params": dict(self.params),
            "edges": [list(e) for e in sorted(self.edges)],
            "theta_min": None if math.isinf(self.theta_min) else self.theta_min,
            "d": self.degree_d,
            "s": self.sparsity_s,
        }
        if self.family == "custom":
            doc["theta_star"] = self.theta_star.array.tolist()
        return doc

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def model_from_json_dict(doc: dict) -> ModelSpec:
    family = doc["family"]
    params = doc.get("params", {})
    if family == "custom":
        return build_custom(SymMatrix(doc["theta_star"]))
    builder = _BUILDERS.get(family)
    if builder is None:
        raise InvalidParameter(f"unknown model family {family!r}")
    return builder(**params)


def load_model_json(path: str | os.PathLike) -> ModelSpec:
    with open(path) as fh:
        return model_from_json_dict(json.load(fh))


def _finish(family, params, sigma, theta, zero_threshold=ZERO_THRESHOLD) -> ModelSpec:
    sigma = SymMatrix.symmetrize(sigma)
    theta = SymMatrix.symmetrize(theta)
    try:
        cholesky(sigma)
        cholesky(theta)
    except NotPositiveDefinite:
        raise InvalidParameter(f"{family} model with {params} is not positive definite") from None
    signed = signed_edge_set(theta, zero_threshold)
    edges = frozenset(signed)
    p = theta.dim
    offdiag_counts = np.zeros(p, dtype=int)
    for i, j in edges:
        offdiag_counts[i] += 1
        offdiag_counts[j] += 1
    t = theta.array
    theta_min = min((abs(t[i, j]) for i, j in edges), default=math.inf)
    return ModelSpec(
        p=p,
        family=family,
        params=dict(params),
        sigma_star=sigma,
        theta_star=theta,
        edges=edges,
        degree_d=int(offdiag_counts.max()) + 1,
        sparsity_s=2 * len(edges),
        theta_min=float(theta_min),
        zero_threshold=zero_threshold,
    )


def _snap(theta: np.ndarray, zero_threshold: float) -> np.ndarray:
    theta = np.array(theta)
    off = ~np.eye(theta.shape[0], dtype=bool)
    theta[off & (np.abs(theta) <= zero_threshold)] = 0.0
    return theta


def build_chain(p: int, rho: float) -> ModelSpec:
    """Markov chain ``0 - 1 - ... - (p-1)`` with ``Sigma_ij = rho**|i-j|``.

    Unit variances and edge covariance ``rho``; the remaining covariances follow
    from the Markov property.
    """
    if p < 2:
        raise InvalidParameter("chain needs p >= 2")
    if not abs(rho) < 1:
        raise InvalidParameter("chain correlation must satisfy |rho| < 1")
    idx = np.arange(p)
    sigma = float(rho) ** np.abs(idx[:, None] - idx[None, :])
    # closed-form AR(1) precision
    theta = np.zeros((p, p))
    scale = 1.0 / (1.0 - rho * rho)
    theta[idx, idx] = (1.0 + rho * rho) * scale
    theta[0, 0] = theta[p - 1, p - 1] = scale
    theta[idx[:-1], idx[1:]] = -rho * scale
    theta[idx[1:], idx[:-1]] = -rho * scale
    return _finish("chain", {"p": p, "rho": rho}, sigma, theta)


def build_star(p: int, hub_degree: int, rho: float) -> ModelSpec:
    """Star with hub node 0 joined to spokes ``1..hub_degree``; other nodes isolated.

    Hub-spoke covariance is ``rho``, spoke-spoke covariance ``rho**2`` and the
    isolated nodes are independent with unit variance.
    """
    d = int(hub_degree)
    if not 1 <= d <= p - 1:
        raise InvalidParameter("hub_degree must lie in [1, p-1]")
    if not abs(rho) < 1:
        raise InvalidParameter(f"star with rho={rho} is not positive definite")
    sigma = np.eye(p)
    spokes = np.arange(1, d + 1)
    block = np.ix_(spokes, spokes)
    sigma[block] = rho * rho
    sigma[spokes, spokes] = 1.0
    sigma[0, spokes] = sigma[spokes, 0] = rho
    theta = np.eye(p)
    scale = 1.0 / (1.0 - rho * rho)
    theta[0, 0] = 1.0 + d * rho * rho * scale
    theta[spokes, spokes] = scale
    theta[0, spokes] = theta[spokes, 0] = -rho * scale
    return _finish("star", {"p": p, "hub_degree": d, "rho": rho}, sigma, theta)


def grid_edges(side: int) -> frozenset[Edge]:
    """4-nearest-neighbour edges of a ``side x side`` lattice, node ``r*side + c``."""
    pairs = []
    for r in range(side):
        for c in range(side):
            k = r * side + c
            if c + 1 < side:
                pairs.append((k, k + 1))
            if r + 1 < side:
                pairs.append((k, k + side))
    return canonical_edges(pairs)


def build_grid(side: int, omega: float) -> ModelSpec:
    """Lattice model with unit diagonal concentration and ``omega`` on lattice edges."""
    if side < 2:
        raise InvalidParameter("grid needs side >= 2")
    p = side * side
    theta = np.eye(p)
    for i, j in grid_edges(side):
        theta[i, j] = theta[j, i] = omega
    try:
        cholesky(theta)
    except NotPositiveDefinite:
        raise InvalidParameter(f"grid concentration with omega={omega} is not positive definite") from None
    sigma = inverse_spd(theta).array
    return _finish("grid", {"side": side, "omega": omega}, sigma, theta)


def build_diamond(rho: float) -> ModelSpec:
    """Four-node diamond: every pair is an edge except nodes 0 and 3.

    Unit variances, covariance ``rho`` on edges other than (1, 2), zero
    covariance on (1, 2) and ``2 rho**2`` on the non-edge (0, 3).
    """
    if abs(rho) > 1 / math.sqrt(2):
        raise InvalidParameter("diamond needs |rho| <= 1/sqrt(2)")
    r = float(rho)
    sigma = np.array(
        [
            [1.0, r, r, 2 * r * r],
            [r, 1.0, 0.0, r],
            [r, 0.0, 1.0, r],
            [2 * r * r, r, r, 1.0],
        ]
    )
    try:
        theta = inverse_spd(sigma).array
    except NotPositiveDefinite:
        raise InvalidParameter(f"diamond with rho={rho} is not positive definite") from None
    return _finish("diamond", {"rho": rho}, sigma, _snap(theta, ZERO_THRESHOLD))


def build_custom(theta_star, zero_threshold: float = ZERO_THRESHOLD) -> ModelSpec:
    theta = SymMatrix(as_array(theta_star))
    cholesky(theta)
    sigma = inverse_spd(theta)
    return _finish("custom", {}, sigma, theta, zero_threshold)


_BUILDERS = {
    "chain": build_chain,
    "star": build_star,
    "grid": build_grid,
    "diamond": build_diamond,
}
