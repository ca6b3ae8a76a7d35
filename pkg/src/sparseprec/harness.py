"""Monte Carlo experiments: recovery probability and error decay versus sample size.

Every trial is keyed by ``(p, hub, strength, n, trial)`` and draws from its own
random stream derived from the root seed and that key, so a
:class:`ResultTable` depends only on the :class:`ExperimentConfig`, never on
the number of worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.optimize

from . import __version__
from .errors import IncoherenceFails, InvalidParameter
from .linalg import norm_elem_max, norm_frobenius, norm_spectral
from .models import ModelSpec, build_chain, build_custom, build_diamond, build_grid, build_star, signed_edge_set
from .sampling import Seed, sample_covariance, sample_gaussian
from .solver import SolverConfig, solve
from .theory import Diagnostics, TailModel, diagnostics, lambda_theory, witness_construct

CSV_COLUMNS = [
    "family",
    "p",
    "d",
    "n",
    "trial",
    "lambda",
    "success",
    "ell_inf",
    "frob",
    "spectral",
    "cov_inf",
    "cov_spec",
    "witness_ok",
    "converged",
    # extras beyond the core schema
    "hub",
    "strength",
    "false_edges",
    "missed_edges",
    "complexity_K",
    "n_over_logp",
    "n_over_d",
]


@dataclass(frozen=True)
class LambdaRule:
    """How the regularization is set for each ``(n, p)``.

    ``theory``: ``(8/alpha) delta_bar(n, p^tau)`` with ``value = tau``;
    ``practical``: ``value * sqrt(log p / n)``; ``fixed``: ``value``.
    """

    kind: str = "practical"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("theory", "practical", "fixed"):
            raise InvalidParameter(f"unknown lambda rule {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "LambdaRule":
        kind, _, value = text.partition(":")
        if kind == "theory":
            return cls("theory", float(value) if value else 3.0)
        if kind == "practical":
            return cls("practical", float(value) if value else 1.0)
        if kind == "fixed":
            return cls("fixed", float(value))
        raise InvalidParameter(f"cannot parse lambda rule {text!r}")

    def __str__(self):
        return f"{self.kind}:{self.value:g}"

    def lam(self, n: int, p: int, diag: Diagnostics | None = None, tail: TailModel | None = None) -> float:
        if self.kind == "fixed":
            return self.value
        if self.kind == "practical":
            return self.value * math.sqrt(math.log(p) / n)
        if diag is None or tail is None:
            raise InvalidParameter("theory lambda needs diagnostics and a tail model")
        if not diag.alpha > 0:
            raise IncoherenceFails(f"theory lambda undefined for alpha={diag.alpha:.4g}")
        return lambda_theory(min(diag.alpha, 1.0), tail, n, p, self.value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep over graph sizes, degrees, strengths and sample sizes.

    ``n_grid`` values are raw sample sizes when ``n_scale == "raw"``, multiples
    of ``log p`` for ``"logp"`` and multiples of the hub degree for
    ``"degree"``. For stars, ``hub_rule="tenth"`` uses ``ceil(0.1 p)`` spokes and
    ``strength_rule="per_degree"`` sets the edge covariance to ``strength / d``.
    """

    family: str
    p_list: tuple
    n_grid: tuple
    trials: int = 50
    lambda_rule: LambdaRule = LambdaRule()
    strengths: tuple = (0.2,)
    hub_degrees: tuple = ()
    hub_rule: str = "fixed"
    strength_rule: str = "fixed"
    n_scale: str = "raw"
    tau: float = 3.0
    seed: int = 0
    tol: float = 1e-7
    max_sweeps: int = 500
    witness: bool = False
    label: str = "experiment"
    custom_theta: tuple | None = None

    def __post_init__(self):
        for name in ("p_list", "n_grid", "strengths"):
            vals = tuple(getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals:
                raise InvalidParameter(f"{name} must be non-empty")
        object.__setattr__(self, "hub_degrees", tuple(self.hub_degrees))
        if isinstance(self.lambda_rule, str):
            object.__setattr__(self, "lambda_rule", LambdaRule.parse(self.lambda_rule))
        if self.trials < 1:
            raise InvalidParameter("trials must be >= 1")
        if self.family not in ("chain", "grid", "star", "diamond", "custom"):
            raise InvalidParameter(f"unknown family {self.family!r}")
        if self.family == "star" and self.hub_rule == "fixed" and not self.hub_degrees:
            raise InvalidParameter("star experiments need hub_degrees or hub_rule='tenth'")
        if self.n_scale not in ("raw", "logp", "degree"):
            raise InvalidParameter(f"unknown n_scale {self.n_scale!r}")
        if self.family == "custom" and self.custom_theta is None:
            raise InvalidParameter("custom family needs custom_theta")

    def to_json_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda_rule"] = str(self.lambda_rule)
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        doc["lambda_rule"] = LambdaRule.parse(doc["lambda_rule"])
        for k in ("p_list", "n_grid", "strengths", "hub_degrees"):
            doc[k] = tuple(doc.get(k, ()))
        if doc.get("custom_theta") is not None:
            doc["custom_theta"] = tuple(tuple(r) for r in doc["custom_theta"])
        return cls(**doc)


@dataclass(frozen=True)
class TrialOutcome:
    family: str
    p: int
    d: int
    n: int
    trial: int
    lam: float
    success: bool
    ell_inf: float
    frob: float
    spectral: float
    cov_inf: float
    cov_spec: float
    witness_ok: bool | None
    converged: bool
    hub: int = 0
    strength: float = 0.0
    false_edges: int = 0
    missed_edges: int = 0
    complexity_K: float = math.nan

    @property
    def n_over_logp(self) -> float:
        return self.n / math.log(self.p)

    @property
    def n_over_d(self) -> float:
        return self.n / max(self.d - 1, 1)

    def as_row(self) -> dict:
        row = {
            "family": self.family,
            "p": self.p,
            "d": self.d,
            "n": self.n,
            "trial": self.trial,
            "lambda": self.lam,
            "success": self.success,
            "ell_inf": self.ell_inf,
            "frob": self.frob,
            "spectral": self.spectral,
            "cov_inf": self.cov_inf,
            "cov_spec": self.cov_spec,
            "witness_ok": self.witness_ok,
            "converged": self.converged,
            "hub": self.hub,
            "strength": self.strength,
            "false_edges": self.false_edges,
            "missed_edges": self.missed_edges,
            "complexity_K": self.complexity_K,
            "n_over_logp": self.n_over_logp,
            "n_over_d": self.n_over_d,
        }
        return row


GroupKey = tuple  # (family, p, hub, strength, n)


@dataclass
class ResultTable:
    rows: list[TrialOutcome] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        if not isinstance(other, ResultTable):
            return NotImplemented
        return len(self.rows) == len(other.rows) and all(
            _rows_equal(a, b) for a, b in zip(self.rows, other.rows)
        )

    def aggregates(self) -> list[dict]:
        """Per ``(family, p, hub, strength, n)`` means and medians, in key order."""
        groups: dict[GroupKey, list[TrialOutcome]] = {}
        for r in self.rows:
            groups.setdefault((r.family, r.p, r.hub, r.strength, r.n), []).append(r)
        out = []
        for key in sorted(groups):
            rs = groups[key]
            succ = np.array([r.success for r in rs], dtype=float)
            ell = np.array([r.ell_inf for r in rs])
            out.append(
                {
                    "family": key[0],
                    "p": key[1],
                    "hub": key[2],
                    "strength": key[3],
                    "n": key[4],
                    "d": rs[0].d,
                    "trials": len(rs),
                    "n_over_logp": rs[0].n_over_logp,
                    "n_over_d": rs[0].n_over_d,
                    "lambda_mean": float(np.mean([r.lam for r in rs])),
                    "success_rate": float(succ.mean()),
                    "success_se": float(math.sqrt(succ.mean() * (1 - succ.mean()) / len(rs))),
                    "ell_inf_mean": float(ell.mean()),
                    "ell_inf_median": float(np.median(ell)),
                    "frob_mean": float(np.mean([r.frob for r in rs])),
                    "spectral_mean": float(np.mean([r.spectral for r in rs])),
                    "cov_inf_mean": float(np.mean([r.cov_inf for r in rs])),
                    "cov_spec_mean": float(np.mean([r.cov_spec for r in rs])),
                    "converged_rate": float(np.mean([r.converged for r in rs])),
                    "complexity_K": rs[0].complexity_K,
                }
            )
        return out

    def curves(self) -> dict[tuple, list[dict]]:
        """Aggregates grouped by ``(family, p, hub, strength)``, each sorted by n."""
        out: dict[tuple, list[dict]] = {}
        for a in self.aggregates():
            out.setdefault((a["family"], a["p"], a["hub"], a["strength"]), []).append(a)
        return out


def _rows_equal(a: TrialOutcome, b: TrialOutcome) -> bool:
    for f in dataclasses.fields(TrialOutcome):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
            continue
        if x != y:
            return False
    return True


# ---------------------------------------------------------------------------
# Models and trials


def _model_grid(cfg: ExperimentConfig) -> list[tuple[tuple, ModelSpec]]:
    out = []
    for p in cfg.p_list:
        if cfg.family == "star":
            hubs = [math.ceil(0.1 * p)] if cfg.hub_rule == "tenth" else list(cfg.hub_degrees)
        else:
            hubs = [0]
        for hub in hubs:
            for strength in cfg.strengths:
                model = _build(cfg, int(p), int(hub), float(strength))
                out.append(((int(p), int(hub), float(strength)), model))
    return out


def _build(cfg: ExperimentConfig, p: int, hub: int, strength: float) -> ModelSpec:
    if cfg.family == "chain":
        return build_chain(p, strength)
    if cfg.family == "star":
        rho = strength / hub if cfg.strength_rule == "per_degree" else strength
        return build_star(p, hub, rho)
    if cfg.family == "grid":
        side = math.isqrt(p)
        if side * side != p:
            raise InvalidParameter(f"grid needs a square p, got {p}")
        return build_grid(side, strength)
    if cfg.family == "diamond":
        return build_diamond(strength)
    return build_custom(np.array(cfg.custom_theta, dtype=float))


def _sample_size(cfg: ExperimentConfig, x: float, p: int, hub: int) -> int:
    if cfg.n_scale == "logp":
        return max(1, int(round(x * math.log(p))))
    if cfg.n_scale == "degree":
        return max(1, int(round(x * max(hub, 1))))
    return int(round(x))


def success_predicate(theta_hat, model: ModelSpec, zero_threshold: float | None = None) -> bool:
    """True when the estimated signed edge set equals the model's exactly."""
    thr = model.zero_threshold if zero_threshold is None else zero_threshold
    return signed_edge_set(theta_hat, thr) == model.signed_edges


def run_trial(cfg: ExperimentConfig, key: tuple, model: ModelSpec, diag: Diagnostics | None, n: int, trial: int) -> TrialOutcome:
    p, hub, strength = key
    seed = Seed(cfg.seed).child(cfg.label, cfg.family, p, hub, strength, n, trial)
    sigma_hat = sample_covariance(sample_gaussian(model, n, seed))
    tail = TailModel.subgaussian(1.0, model.max_variance)
    lam = cfg.lambda_rule.lam(n, p, diag, tail)
    config = SolverConfig(lam, tol=cfg.tol, max_outer_sweeps=cfg.max_sweeps)
    result = solve(sigma_hat, config)
    theta_hat = result.theta_hat
    est = signed_edge_set(theta_hat, model.zero_threshold)
    truth = model.signed_edges
    err = theta_hat.array - model.theta_star.array
    cov_err = result.w_hat.array - model.sigma_star.array
    witness_ok = None
    if cfg.witness:
        if diag is None:
            diag = diagnostics(model)
        witness_ok = witness_construct(model, sigma_hat, lam, config, diag=diag, compare_full=False).strict_dual_feasible
    return TrialOutcome(
        family=cfg.family,
        p=p,
        d=model.degree_d,
        n=n,
        trial=trial,
        lam=lam,
        success=est == truth,
        ell_inf=norm_elem_max(err),
        frob=norm_frobenius(err),
        spectral=norm_spectral(err),
        cov_inf=norm_elem_max(cov_err),
        cov_spec=norm_spectral(cov_err),
        witness_ok=witness_ok,
        converged=result.converged,
        hub=hub,
        strength=strength,
        false_edges=sum(1 for e in est if e not in truth),
        missed_edges=sum(1 for e in truth if e not in est),
        complexity_K=diag.complexity_K if diag is not None else math.nan,
    )


def _run_chunk(args):
    cfg, jobs = args
    return [run_trial(cfg, *job) for job in jobs]


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Run every ``(model, n, trial)`` cell of the sweep and collect outcomes in key order."""
    jobs = []
    for key, model in _model_grid(cfg):
        diag = diagnostics(model)
        p, hub, _ = key
        for x in cfg.n_grid:
            n = _sample_size(cfg, x, p, hub)
            for t in range(cfg.trials):
                jobs.append((key, model, diag, n, t))
    if threads <= 1:
        rows = [run_trial(cfg, *job) for job in jobs]
    else:
        chunks = [jobs[i::threads] for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = [r for part in pool.map(_run_chunk, [(cfg, c) for c in chunks]) for r in part]
    rows.sort(key=lambda r: (r.p, r.hub, r.strength, r.n, r.trial))
    return ResultTable(rows)


def run_model_selection(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Probability of exact signed-edge recovery across ``p`` and ``n``."""
    return run_experiment(cfg, threads)


def run_ellinf_rate(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Elementwise error decay; rows carry all three precision-matrix error norms."""
    return run_experiment(cfg, threads)


def run_degree_sweep(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    if cfg.family != "star" or not cfg.hub_degrees:
        raise InvalidParameter("degree sweep needs a star family with a hub_degrees list")
    return run_experiment(cfg, threads)


def run_complexity_sweep(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Sweep over ``strengths``; each row carries the model's complexity term."""
    if len(cfg.strengths) < 2:
        raise InvalidParameter("complexity sweep needs at least two strengths")
    return run_experiment(cfg, threads)


# ---------------------------------------------------------------------------
# Curve summaries


def n50(ns, rates) -> float | None:
    """Sample size at which the success rate first reaches 0.5 (linear interpolation)."""
    ns = list(ns)
    rates = list(rates)
    for i, r in enumerate(rates):
        if r >= 0.5:
            if i == 0:
                return float(ns[0])
            n0, n1, r0 = ns[i - 1], ns[i], rates[i - 1]
            return float(n0 + (0.5 - r0) * (n1 - n0) / (r - r0))
    return None


def n50_by_curve(table: ResultTable) -> dict[tuple, float | None]:
    return {k: n50([a["n"] for a in c], [a["success_rate"] for a in c]) for k, c in table.curves().items()}


def coefficient_of_variation(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.std(v) / np.mean(v))


def relative_spread(values) -> float:
    """``(max - min) / mean``."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.mean())


def loglog_slope(ns, errors) -> float:
    """Least-squares slope of ``log(error)`` on ``log(n)``."""
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


def isotonic_deviation(table: ResultTable) -> dict[tuple, float]:
    """Per curve, the largest gap between the success rates and their increasing fit, in standard errors.

    The standard error uses the fitted rate, floored at one trial's worth, so
    a flat 0 or 1 curve gives 0.
    """
    out = {}
    for key, curve in table.curves().items():
        rates = np.array([a["success_rate"] for a in curve])
        trials = np.array([a["trials"] for a in curve], dtype=float)
        fit = scipy.optimize.isotonic_regression(rates, weights=trials, increasing=True).x
        q = np.clip(fit, 1 / trials, 1 - 1 / trials)
        se = np.sqrt(q * (1 - q) / trials)
        out[key] = float(np.max(np.abs(rates - fit) / se))
    return out


# ---------------------------------------------------------------------------
# Output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _aggregates_path(path: Path) -> Path:
    if path.stem == "rows":
        return path.with_name("aggregates" + path.suffix)
    return path.with_name(path.stem + "_aggregates" + path.suffix)


def emit(table: ResultTable, fmt: str, path: str | os.PathLike) -> Path:
    """Write rows to ``path`` and per-group aggregates next to it; returns the aggregates path."""
    path = Path(path)
    agg_path = _aggregates_path(path)
    aggregates = table.aggregates()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in table.rows:
                row = r.as_row()
                w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        with open(agg_path, "w", newline="") as fh:
            if aggregates:
                w = csv.DictWriter(fh, fieldnames=list(aggregates[0]))
                w.writeheader()
                for a in aggregates:
                    w.writerow({k: _fmt(v) for k, v in a.items()})
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({"columns": CSV_COLUMNS, "rows": [_jsonable(r.as_row()) for r in table.rows]}, fh, indent=1)
        with open(agg_path, "w") as fh:
            json.dump({"aggregates": [_jsonable(a) for a in aggregates]}, fh, indent=1)
    else:
        raise InvalidParameter(f"unknown output format {fmt!r}")
    return agg_path


def _jsonable(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def _parse_bool(s: str):
    if s == "":
        return None
    return s == "true"


def read_rows_csv(path: str | os.PathLike) -> ResultTable:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                TrialOutcome(
                    family=rec["family"],
                    p=int(rec["p"]),
                    d=int(rec["d"]),
                    n=int(rec["n"]),
                    trial=int(rec["trial"]),
                    lam=float(rec["lambda"]),
                    success=_parse_bool(rec["success"]),
                    ell_inf=float(rec["ell_inf"]),
                    frob=float(rec["frob"]),
                    spectral=float(rec["spectral"]),
                    cov_inf=float(rec["cov_inf"]),
                    cov_spec=float(rec["cov_spec"]),
                    witness_ok=_parse_bool(rec["witness_ok"]),
                    converged=_parse_bool(rec["converged"]),
                    hub=int(rec.get("hub") or 0),
                    strength=float(rec.get("strength") or 0.0),
                    false_edges=int(rec.get("false_edges") or 0),
                    missed_edges=int(rec.get("missed_edges") or 0),
                    complexity_K=float(rec.get("complexity_K") or "nan"),
                )
            )
    return ResultTable(rows)


def write_outputs(table: ResultTable, cfg: ExperimentConfig, out_dir: str | os.PathLike, threads: int = 1) -> dict:
    """``rows.csv``, ``aggregates.csv`` and ``config-echo.json`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit(table, "csv", out / "rows.csv")
    echo = {"version": __version__, "threads": threads, "config": cfg.to_json_dict()}
    with open(out / "config-echo.json", "w") as fh:
        json.dump(echo, fh, indent=2)
    return {"rows": str(out / "rows.csv"), "aggregates": str(out / "aggregates.csv"), "config": str(out / "config-echo.json")}
