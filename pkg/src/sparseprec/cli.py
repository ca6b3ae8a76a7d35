"""Command-line entry point: ``sparseprec <solve|diagnose|witness|simulate|rates>``.

Node labels in reports are 1-based.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import SparsePrecError
from .harness import (
    ExperimentConfig,
    LambdaRule,
    loglog_slope,
    n50_by_curve,
    run_ellinf_rate,
    run_experiment,
    write_outputs,
)
from .linalg import read_matrix_csv, write_matrix_csv
from .models import ModelSpec, build_chain, build_diamond, build_grid, build_star, load_model_json
from .sampling import Seed, sample_covariance, sample_gaussian
from .solver import SolverConfig, solve
from .theory import (
    TailModel,
    diagnostics,
    lambda_theory,
    predicted_bounds,
    threshold_ellinf,
    threshold_model_selection,
    witness_construct,
)


def _float_list(text: str) -> list[float]:
    """``"1,2,3"`` or ``"start:stop:step"`` (stop inclusive)."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(count)]
    return [float(x) for x in text.split(",") if x]


def _int_list(text: str) -> list[int]:
    return [int(round(x)) for x in _float_list(text)]


def _clean(x):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _write_json(doc: dict, path: str | None) -> None:
    text = json.dumps(_clean(doc), indent=2)
    if path is None or path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _edge_labels(edges) -> list[list[int]]:
    return [[i + 1, j + 1] for i, j in sorted(edges)]


def _add_model_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--model", help="model spec JSON file")
    ap.add_argument("--family", choices=["chain", "star", "grid", "diamond"])
    ap.add_argument("--p", type=int, help="dimension (grid: side*side)")
    ap.add_argument("--rho", type=float, help="chain/star/diamond strength")
    ap.add_argument("--omega", type=float, help="grid edge weight")
    ap.add_argument("--hub-d", type=int, help="star hub degree")


def _model_from_args(args) -> ModelSpec:
    if args.model:
        return load_model_json(args.model)
    if args.family == "chain":
        return build_chain(args.p, args.rho)
    if args.family == "star":
        return build_star(args.p, args.hub_d if args.hub_d is not None else args.p - 1, args.rho)
    if args.family == "grid":
        side = math.isqrt(args.p)
        if side * side != args.p:
            raise SystemExit(f"grid needs a square --p, got {args.p}")
        return build_grid(side, args.omega)
    if args.family == "diamond":
        return build_diamond(args.rho)
    raise SystemExit("give --model or --family")


def cmd_solve(args) -> int:
    s = read_matrix_csv(args.input, symmetrize=args.symmetrize)
    res = solve(s, SolverConfig(args.lam, tol=args.tol, max_outer_sweeps=args.max_sweeps))
    write_matrix_csv(res.theta_hat, args.out)
    if args.dual_out:
        write_matrix_csv(res.z_hat, args.dual_out)
    report = {
        "lambda": res.lam,
        "sweeps": res.sweeps,
        "kkt_residual": res.kkt_residual,
        "converged": res.converged,
        "objective": res.objective,
    }
    if args.report:
        _write_json(report, args.report)
    return 0 if res.converged else 2


def cmd_diagnose(args) -> int:
    model = _model_from_args(args)
    diag = diagnostics(model)
    tail = TailModel.parse(args.tail, model.max_variance)
    doc = {
        "family": model.family,
        "p": model.p,
        "edges": _edge_labels(model.edges),
        "diagnostics": diag.to_dict(),
        "tail": {"variant": tail.variant, "c_star": tail.c_star, "v_star": tail.v_star},
        "tau": args.tau,
    }
    if diag.incoherent:
        doc["threshold_ellinf"] = threshold_ellinf(diag, tail, model.p, args.tau)
        doc["threshold_model_selection"] = threshold_model_selection(diag, tail, model.p, args.tau)
        if args.n is not None:
            doc["n"] = args.n
            doc["lambda_theory"] = lambda_theory(min(diag.alpha, 1.0), tail, args.n, model.p, args.tau)
            doc["predicted_bounds"] = predicted_bounds(diag, tail, args.n, model.p, args.tau)
    else:
        doc["note"] = "incoherence fails (alpha <= 0); thresholds undefined"
    _write_json(doc, args.out)
    return 0


def cmd_witness(args) -> int:
    model = _model_from_args(args)
    diag = diagnostics(model)
    data = sample_gaussian(model, args.n, Seed(args.seed).child("witness"))
    s = sample_covariance(data, center=args.center)
    if args.lam == "theory":
        tail = TailModel.parse(args.tail, model.max_variance)
        lam = lambda_theory(min(diag.alpha, 1.0), tail, args.n, model.p, args.tau)
    else:
        lam = float(args.lam)
    rep = witness_construct(model, s, lam, diag=diag)
    doc = rep.to_dict()
    doc["lambda"] = lam
    doc["n"] = args.n
    doc["seed"] = args.seed
    z = rep.z_tilde.array
    outside = ~np.eye(model.p, dtype=bool)
    doc["dual_violations"] = [
        [i + 1, j + 1]
        for i, j in zip(*np.nonzero(outside & (np.abs(z) >= 1.0)))
        if i < j and (i, j) not in model.edges
    ]
    _write_json(doc, args.out)
    return 0


def _sim_config(args, family: str, **overrides) -> ExperimentConfig:
    strength = args.omega if family == "grid" else args.rho
    if strength is None:
        raise SystemExit("give --rho (or --omega for grid)")
    kw = dict(
        family=family,
        p_list=tuple(_int_list(args.p)),
        n_grid=tuple(_float_list(args.n)),
        trials=args.trials,
        lambda_rule=LambdaRule.parse(args.lam),
        strengths=(strength,),
        hub_degrees=tuple(_int_list(args.hub_d)) if args.hub_d else (),
        n_scale=args.n_scale,
        tau=args.tau,
        seed=args.seed,
        tol=args.tol,
        max_sweeps=args.max_sweeps,
        witness=args.witness,
        label=args.label,
    )
    kw.update(overrides)
    return ExperimentConfig(**kw)


def _curve_summary(table) -> list[dict]:
    return [
        {"family": k[0], "p": k[1], "hub": k[2], "strength": k[3], "n50": v}
        for k, v in n50_by_curve(table).items()
    ]


def cmd_simulate(args) -> int:
    cfg = _sim_config(args, args.family, strength_rule=args.strength_rule, hub_rule=args.hub_rule)
    table = run_experiment(cfg, threads=args.threads)
    paths = write_outputs(table, cfg, args.out, threads=args.threads)
    _write_json({"outputs": paths, "n50": _curve_summary(table)}, None)
    return 0


def cmd_rates(args) -> int:
    cfg = _sim_config(args, "star", strength_rule="per_degree", hub_rule="tenth", n_scale=args.n_scale)
    table = run_ellinf_rate(cfg, threads=args.threads)
    paths = write_outputs(table, cfg, args.out, threads=args.threads)
    slopes = []
    for k, curve in table.curves().items():
        keep = [a for a in curve if a["n_over_logp"] >= args.min_n_over_logp]
        if len(keep) >= 2:
            ns = [a["n"] for a in keep]
            slopes.append(
                {
                    "p": k[1],
                    "hub": k[2],
                    "slope_ell_inf": loglog_slope(ns, [a["ell_inf_mean"] for a in keep]),
                    "slope_frob": loglog_slope(ns, [a["frob_mean"] for a in keep]),
                    "slope_spectral": loglog_slope(ns, [a["spectral_mean"] for a in keep]),
                }
            )
    Path(args.out, "slopes.json").write_text(json.dumps(slopes, indent=2) + "\n")
    _write_json({"outputs": paths, "slopes": slopes}, None)
    return 0


def _add_sim_args(ap: argparse.ArgumentParser, rates: bool) -> None:
    ap.add_argument("--p", required=True, help="comma list or start:stop:step")
    if rates:
        ap.add_argument("--rho", type=float, default=2.5, help="edge covariance numerator, divided by d")
        ap.add_argument("--omega", type=float)
        ap.add_argument("--hub-d", help=argparse.SUPPRESS)
    else:
        ap.add_argument("--rho", type=float)
        ap.add_argument("--omega", type=float)
        ap.add_argument("--hub-d", help="star hub degrees, comma list")
    ap.add_argument("--n", required=True, help="comma list or start:stop:step")
    ap.add_argument("--n-scale", choices=["raw", "logp", "degree"], default="logp" if rates else "raw")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--lambda", dest="lam", default="practical:1", help="theory:tau | practical:c | fixed:v")
    ap.add_argument("--tau", type=float, default=3.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--tol", type=float, default=1e-7)
    ap.add_argument("--max-sweeps", type=int, default=500)
    ap.add_argument("--witness", action="store_true", help="run the witness check per trial")
    ap.add_argument("--label", default="rates" if rates else "simulate")
    ap.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparseprec", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="estimate a precision matrix from a covariance CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--max-sweeps", type=int, default=500)
    sp.add_argument("--symmetrize", action="store_true", help="average the input with its transpose")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dual-out")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_solve)

    dp = sub.add_parser("diagnose", help="incoherence, constants, thresholds and predicted bounds")
    _add_model_args(dp)
    dp.add_argument("--tail", default="subgaussian:1")
    dp.add_argument("--tau", type=float, default=3.0)
    dp.add_argument("--n", type=int)
    dp.add_argument("--out")
    dp.set_defaults(func=cmd_diagnose)

    wp = sub.add_parser("witness", help="primal-dual witness on one sampled data set")
    _add_model_args(wp)
    wp.add_argument("--n", type=int, required=True)
    wp.add_argument("--lambda", dest="lam", default="theory", help="a number or 'theory'")
    wp.add_argument("--tail", default="subgaussian:1")
    wp.add_argument("--tau", type=float, default=3.0)
    wp.add_argument("--seed", type=int, default=0)
    wp.add_argument("--center", action="store_true", help="subtract the sample mean (off by default)")
    wp.add_argument("--out")
    wp.set_defaults(func=cmd_witness)

    mp = sub.add_parser("simulate", help="Monte Carlo recovery sweep")
    mp.add_argument("--family", required=True, choices=["chain", "star", "grid", "diamond"])
    mp.add_argument("--strength-rule", choices=["fixed", "per_degree"], default="fixed")
    mp.add_argument("--hub-rule", choices=["fixed", "tenth"], default="fixed")
    _add_sim_args(mp, rates=False)
    mp.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("rates", help="error decay on stars with d = ceil(0.1 p)")
    rp.add_argument("--min-n-over-logp", type=float, default=40.0)
    _add_sim_args(rp, rates=True)
    rp.set_defaults(func=cmd_rates)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SparsePrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
