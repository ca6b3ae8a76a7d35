"""Analysis quantities for the l1-penalized log-determinant estimator.

Covers the edge Hessian blocks, incoherence and conditioning constants, the
tail functions and their inverses, sample-size thresholds and error-bound
predictions, the Taylor remainder of the inverse map, and a numerical
primal-dual witness construction.

Pairs ``(j, k)`` index Hessian rows in row-major order, matching
``np.kron(sigma, sigma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, IncoherenceFails, InvalidParameter, SingularGammaSS
from .linalg import SymMatrix, as_array, inverse_spd, norm_elem_max, norm_linf_op
from .models import ModelSpec
from .sampling import noise_matrix
from .solver import SolveResult, SolverConfig, Support, solve, solve_restricted


# ---------------------------------------------------------------------------
# Hessian blocks and diagnostics


@dataclass(frozen=True)
class GammaBlocks:
    gamma_ss: np.ndarray
    gamma_scs: np.ndarray
    s_pairs: list
    sc_pairs: list


def _pair_arrays(pairs):
    if not pairs:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    arr = np.asarray(pairs, dtype=int)
    return arr[:, 0], arr[:, 1]


def gamma_blocks(sigma_star, support: Support) -> GammaBlocks:
    """The ``(S, S)`` and ``(S^c, S)`` blocks of ``kron(sigma, sigma)``.

    Entry ``((j, k), (l, m))`` is ``sigma[j, l] * sigma[k, m]``; the full
    ``p^2 x p^2`` matrix is never formed.
    """
    sig = as_array(sigma_star)
    if sig.shape[0] != support.p:
        raise DimensionMismatch("support and covariance dimensions differ")
    s_pairs = support.pairs
    sc_pairs = [(int(i), int(j)) for i, j in zip(*np.nonzero(~support.mask))]
    j, k = _pair_arrays(s_pairs)
    jc, kc = _pair_arrays(sc_pairs)
    gamma_ss = sig[np.ix_(j, j)] * sig[np.ix_(k, k)]
    gamma_scs = sig[np.ix_(jc, j)] * sig[np.ix_(kc, k)]
    return GammaBlocks(gamma_ss, gamma_scs, s_pairs, sc_pairs)


@dataclass(frozen=True)
class Diagnostics:
    k_sigma: float
    k_gamma: float
    alpha: float
    theta_min: float
    degree_d: int
    sparsity_s: int
    complexity_K: float
    max_var: float

    @property
    def incoherent(self) -> bool:
        return self.alpha > 0

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["incoherent"] = self.incoherent
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}


def incoherence_matrix_norm(blocks: GammaBlocks) -> tuple[float, float]:
    """Return ``(|||inv(G_SS)|||_inf, |||G_ScS inv(G_SS)|||_inf)``."""
    try:
        factor = scipy.linalg.cho_factor(blocks.gamma_ss, lower=True)
    except np.linalg.LinAlgError:
        raise SingularGammaSS("Gamma_SS is not positive definite") from None
    inv_ss = scipy.linalg.cho_solve(factor, np.eye(blocks.gamma_ss.shape[0]))
    k_gamma = float(np.max(np.abs(inv_ss).sum(axis=1)))
    if blocks.gamma_scs.shape[0] == 0:
        return k_gamma, 0.0
    # G_ScS inv(G_SS) = (inv(G_SS) G_SSc)^T since G_SS is symmetric
    mixed = scipy.linalg.cho_solve(factor, blocks.gamma_scs.T).T
    return k_gamma, float(np.max(np.abs(mixed).sum(axis=1)))


def complexity_term(alpha, max_var, k_sigma, k_gamma, degree_d, theta_min) -> float:
    """Model-complexity factor ``(1 + 8/alpha) max_var max{K_S K_G, K_S^3 K_G^2, K_G/(d theta_min)}``."""
    if alpha <= 0:
        return math.inf
    return (1 + 8 / alpha) * max_var * max(
        k_sigma * k_gamma, k_sigma**3 * k_gamma**2, k_gamma / (degree_d * theta_min)
    )


def diagnostics(model: ModelSpec) -> Diagnostics:
    """Conditioning constants, incoherence margin and complexity of a model.

    A non-positive ``alpha`` is returned as data; callers that need a positive
    margin raise :class:`IncoherenceFails` themselves.
    """
    blocks = gamma_blocks(model.sigma_star, Support.from_model(model))
    k_gamma, mixed = incoherence_matrix_norm(blocks)
    k_sigma = norm_linf_op(model.sigma_star)
    alpha = 1.0 - mixed
    max_var = model.max_variance
    return Diagnostics(
        k_sigma=k_sigma,
        k_gamma=k_gamma,
        alpha=alpha,
        theta_min=model.theta_min,
        degree_d=model.degree_d,
        sparsity_s=model.sparsity_s,
        complexity_K=complexity_term(alpha, max_var, k_sigma, k_gamma, model.degree_d, model.theta_min),
        max_var=max_var,
    )


# ---------------------------------------------------------------------------
# Tail functions


@dataclass(frozen=True)
class TailModel:
    """Tail function for entrywise deviations of the sample covariance.

    ``subgaussian``: ``f(n, d) = exp(c n d^2) / 4`` valid for ``d < 1/v_star``.
    ``polynomial``: ``f(n, d) = c n^m d^(2m)`` valid for all ``d``.
    """

    variant: str
    max_var: float
    sigma: float = 1.0
    m: int = 1
    k_m: float = 1.0

    def __post_init__(self):
        if self.variant not in ("subgaussian", "polynomial"):
            raise InvalidParameter(f"unknown tail variant {self.variant!r}")
        if not self.max_var > 0:
            raise InvalidParameter("max_var must be positive")
        if self.variant == "subgaussian" and not self.sigma > 0:
            raise InvalidParameter("sigma must be positive")
        if self.variant == "polynomial" and (self.m < 1 or not self.k_m > 0):
            raise InvalidParameter("need m >= 1 and k_m > 0")

    @classmethod
    def subgaussian(cls, sigma: float = 1.0, max_var: float = 1.0) -> "TailModel":
        return cls("subgaussian", max_var=max_var, sigma=sigma)

    @classmethod
    def polynomial(cls, m: int, k_m: float, max_var: float = 1.0) -> "TailModel":
        return cls("polynomial", max_var=max_var, m=int(m), k_m=k_m)

    @classmethod
    def parse(cls, text: str, max_var: float) -> "TailModel":
        """``subgaussian:<sigma>`` or ``polynomial:<m>:<k_m>``."""
        parts = text.split(":")
        if parts[0] == "subgaussian":
            return cls.subgaussian(float(parts[1]) if len(parts) > 1 else 1.0, max_var)
        if parts[0] == "polynomial" and len(parts) == 3:
            return cls.polynomial(int(parts[1]), float(parts[2]), max_var)
        raise InvalidParameter(f"cannot parse tail spec {text!r}")

    @property
    def c_star(self) -> float:
        if self.variant == "subgaussian":
            return 1.0 / (128.0 * (1 + 4 * self.sigma**2) ** 2 * self.max_var**2)
        m = self.m
        return 1.0 / (m ** (2 * m + 1) * 2 ** (2 * m) * self.max_var ** (2 * m) * (self.k_m + 1))

    @property
    def v_star(self) -> float:
        """Inverse validity ceiling; zero means the bound holds for every deviation."""
        if self.variant == "subgaussian":
            return 1.0 / (self.max_var * 8 * (1 + 4 * self.sigma**2))
        return 0.0

    def f(self, n: float, delta: float) -> float:
        if self.variant == "subgaussian":
            return 0.25 * math.exp(self.c_star * n * delta**2)
        return self.c_star * n**self.m * delta ** (2 * self.m)


def tail_delta_inverse(tail: TailModel, n: float, r: float) -> float:
    """Largest deviation ``delta`` with ``f(n, delta) <= r``."""
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    if tail.variant == "subgaussian":
        if not r > 0.25:
            raise InvalidParameter("r must exceed 1/4 for the sub-Gaussian tail")
        return math.sqrt(math.log(4 * r) / (tail.c_star * n))
    if not r > 0:
        raise InvalidParameter("r must be positive")
    return (r / tail.c_star) ** (1 / (2 * tail.m)) / math.sqrt(n)


def tail_n_inverse(tail: TailModel, delta: float, r: float) -> float:
    """Largest sample size ``n`` with ``f(n, delta) <= r``."""
    if not delta > 0:
        raise InvalidParameter("delta must be positive")
    if tail.variant == "subgaussian":
        if not r > 0.25:
            raise InvalidParameter("r must exceed 1/4 for the sub-Gaussian tail")
        return math.log(4 * r) / (tail.c_star * delta**2)
    if not r > 0:
        raise InvalidParameter("r must be positive")
    return (r / tail.c_star) ** (1 / tail.m) / delta**2


def _check_tau(tau: float):
    if not tau > 2:
        raise InvalidParameter("tau must exceed 2")


def lambda_theory(alpha: float, tail: TailModel, n: float, p: int, tau: float) -> float:
    """Regularization ``(8/alpha) * delta_bar(n, p^tau)``."""
    if not 0 < alpha <= 1:
        raise InvalidParameter("alpha must lie in (0, 1]")
    _check_tau(tau)
    return 8.0 / alpha * tail_delta_inverse(tail, n, float(p) ** tau)


def _require_incoherent(diag: Diagnostics):
    if not diag.alpha > 0:
        raise IncoherenceFails(f"incoherence margin alpha={diag.alpha:.4g} is not positive")


def _hessian_term(diag: Diagnostics) -> float:
    ks, kg = diag.k_sigma, diag.k_gamma
    return 6 * (1 + 8 / diag.alpha) * diag.degree_d * max(ks * kg, ks**3 * kg**2)


def threshold_ellinf(diag: Diagnostics, tail: TailModel, p: int, tau: float) -> float:
    """Sample size above which the elementwise error bound is guaranteed."""
    _require_incoherent(diag)
    _check_tau(tau)
    return tail_n_inverse(tail, 1.0 / max(tail.v_star, _hessian_term(diag)), float(p) ** tau)


def threshold_model_selection(diag: Diagnostics, tail: TailModel, p: int, tau: float) -> float:
    """As :func:`threshold_ellinf` with the extra ``2 K_G (1 + 8/alpha) / theta_min`` term."""
    _require_incoherent(diag)
    _check_tau(tau)
    signal = 2 * diag.k_gamma * (1 + 8 / diag.alpha) / diag.theta_min
    return tail_n_inverse(tail, 1.0 / max(signal, tail.v_star, _hessian_term(diag)), float(p) ** tau)


def predicted_bounds(diag: Diagnostics, tail: TailModel, n: float, p: int, tau: float) -> dict[str, float]:
    """High-probability error bounds for the precision and covariance estimates."""
    _require_incoherent(diag)
    _check_tau(tau)
    delta = tail_delta_inverse(tail, n, float(p) ** tau)
    factor = 1 + 8 / diag.alpha
    ks, kg, d = diag.k_sigma, diag.k_gamma, diag.degree_d
    ellinf = 2 * factor * kg * delta
    root = math.sqrt(diag.sparsity_s + p)
    c3 = 2 * ks**2 * kg * factor
    c4 = 6 * ks**3 * kg**2 * factor**2
    return {
        "ellinf": ellinf,
        "frobenius": ellinf * root,
        "spectral": ellinf * min(root, d),
        "cov_ellinf": c3 * delta + c4 * d * delta**2,
        "cov_spectral": c3 * d * delta + c4 * d**2 * delta**2,
    }


# ---------------------------------------------------------------------------
# Remainder and witness


def remainder(theta_star, delta) -> SymMatrix:
    """``inv(theta + delta) - inv(theta) + inv(theta) delta inv(theta)``."""
    t = as_array(theta_star)
    d = as_array(delta)
    inv_t = inverse_spd(t).array
    inv_td = inverse_spd(SymMatrix.symmetrize(t + d)).array
    return SymMatrix.symmetrize(inv_td - inv_t + inv_t @ d @ inv_t)


@dataclass(frozen=True)
class WitnessReport:
    strict_dual_feasible: bool
    max_abs_z_sc: float
    restricted_result: SolveResult
    z_tilde: SymMatrix
    ell_inf_error: float
    sign_consistent: bool
    w_inf: float
    remainder_inf: float
    lemma4_lhs: float
    lemma4_rhs: float
    lemma6_radius: float
    lemma6_precondition_ok: bool
    lemma7_ok: bool
    diagnostics: Diagnostics
    full_result: SolveResult | None = None
    full_gap: float | None = None

    def to_dict(self) -> dict:
        out = {
            k: getattr(self, k)
            for k in (
                "strict_dual_feasible",
                "max_abs_z_sc",
                "ell_inf_error",
                "sign_consistent",
                "w_inf",
                "remainder_inf",
                "lemma4_lhs",
                "lemma4_rhs",
                "lemma6_radius",
                "lemma6_precondition_ok",
                "lemma7_ok",
                "full_gap",
            )
        }
        out["lemma4_holds"] = self.lemma4_lhs <= self.lemma4_rhs
        rr = self.restricted_result
        out["restricted"] = {
            "lambda": rr.lam,
            "sweeps": rr.sweeps,
            "kkt_residual": rr.kkt_residual,
            "converged": rr.converged,
            "objective": rr.objective,
        }
        out["diagnostics"] = self.diagnostics.to_dict()
        return out


def witness_construct(
    model: ModelSpec,
    sigma_hat,
    lam: float,
    config: SolverConfig | None = None,
    diag: Diagnostics | None = None,
    compare_full: bool = True,
) -> WitnessReport:
    """Primal-dual witness for ``sigma_hat`` at regularization ``lam``.

    Solves the problem restricted to the true augmented support, completes the
    dual off the support so that stationarity holds, and checks strict dual
    feasibility plus the deterministic sufficient conditions on noise,
    remainder, error radius and minimum edge weight.

    With ``compare_full`` the unrestricted problem is solved too whenever the
    witness is strictly dual feasible, and ``full_gap`` holds the elementwise
    distance between the two solutions.
    """
    if not lam > 0:
        raise InvalidParameter("lambda must be > 0")
    s = as_array(sigma_hat)
    if s.shape != (model.p, model.p):
        raise DimensionMismatch("sigma_hat does not match the model dimension")
    config = replace(config, lam=lam) if config is not None else SolverConfig(lam)
    diag = diag if diag is not None else diagnostics(model)
    support = Support.from_model(model)

    restricted = solve_restricted(s, support, config)
    theta_t = restricted.theta_hat.array
    w_t = restricted.w_hat.array

    outside = ~support.mask
    z = restricted.z_hat.array.copy()
    z[outside] = (w_t[outside] - s[outside]) / lam
    max_abs_z_sc = float(np.max(np.abs(z[outside]))) if outside.any() else 0.0

    theta_star = model.theta_star.array
    delta = theta_t - theta_star
    noise_inf = norm_elem_max(noise_matrix(s, model))
    rem_inf = norm_elem_max(remainder(theta_star, delta))
    sign_ok = all(
        abs(theta_t[i, j]) > model.zero_threshold and np.sign(theta_t[i, j]) == sgn
        for (i, j), sgn in model.signed_edges.items()
    )
    ks, kg, d = diag.k_sigma, diag.k_gamma, diag.degree_d
    radius = 2 * kg * (noise_inf + lam)
    strict = max_abs_z_sc < 1.0

    full = None
    gap = None
    if compare_full and strict:
        full = solve(s, config)
        gap = norm_elem_max(full.theta_hat.array - theta_t)

    return WitnessReport(
        strict_dual_feasible=strict,
        max_abs_z_sc=max_abs_z_sc,
        restricted_result=restricted,
        z_tilde=SymMatrix.symmetrize(z),
        ell_inf_error=norm_elem_max(delta),
        sign_consistent=bool(sign_ok),
        w_inf=noise_inf,
        remainder_inf=rem_inf,
        lemma4_lhs=max(noise_inf, rem_inf),
        lemma4_rhs=diag.alpha * lam / 8,
        lemma6_radius=radius,
        lemma6_precondition_ok=radius <= min(1 / (3 * ks * d), 1 / (3 * ks**3 * kg * d)),
        lemma7_ok=diag.theta_min >= 2 * radius,
        diagnostics=diag,
        full_result=full,
        full_gap=gap,
    )


@dataclass(frozen=True)
class NoiseEvent:
    w_inf: float
    delta_bar: float
    event_holds: bool


def noise_event_check(model: ModelSpec, sigma_hat, tail: TailModel, n: float, p: int, tau: float) -> NoiseEvent:
    """Whether ``||sigma_hat - Sigma*||_max <= delta_bar(n, p^tau)``."""
    _check_tau(tau)
    w_inf = norm_elem_max(noise_matrix(sigma_hat, model))
    delta_bar = tail_delta_inverse(tail, n, float(p) ** tau)
    return NoiseEvent(w_inf, delta_bar, w_inf <= delta_bar)


def remainder_bound(k_sigma: float, degree_d: int, delta_inf: float) -> float:
    """Bound ``1.5 d ||delta||^2 K_S^3`` on ``||R(delta)||``, valid when ``||delta|| <= 1/(3 K_S d)``."""
    return 1.5 * degree_d * delta_inf**2 * k_sigma**3
