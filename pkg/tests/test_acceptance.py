"""Acceptance suite: twelve end-to-end criteria, one PASS/FAIL line each.

Run with ``pytest -v -s tests/test_acceptance.py`` to see the report lines, or
``python tests/test_acceptance.py`` for the report alone.
"""

from __future__ import annotations

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_spd  # noqa: E402
from sparseprec.harness import (  # noqa: E402
    ExperimentConfig,
    LambdaRule,
    coefficient_of_variation,
    loglog_slope,
    n50_by_curve,
    relative_spread,
    run_degree_sweep,
    run_ellinf_rate,
    run_model_selection,
)
from sparseprec.linalg import SymMatrix, norm_elem_max  # noqa: E402
from sparseprec.models import build_chain, build_diamond, build_grid, build_star, signed_edge_set  # noqa: E402
from sparseprec.sampling import Seed, empirical_tail_check, sample_covariance, sample_gaussian  # noqa: E402
from sparseprec.solver import SolverConfig, Support, check_kkt, solve  # noqa: E402
from sparseprec.theory import (  # noqa: E402
    TailModel,
    diagnostics,
    gamma_blocks,
    lambda_theory,
    remainder_bound,
    noise_event_check,
    remainder,
    witness_construct,
)

ROOT_SEED = 20240601
CHAIN_GRID = tuple(25 * 2 ** (k / 2) for k in range(15))  # n / log p, 25 .. 3200
RATE_GRID = tuple(40 * 2**k for k in range(12))  # n / log p, 40 .. 81920
DEGREE_GRID = tuple(2 * 2 ** (k / 2) for k in range(15))  # n / d, 2 .. 256


def report(number: int, title: str, ok: bool, detail: str) -> None:
    print(f"ACCEPT {number:02d} {title:<28} {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


# ---------------------------------------------------------------------------
# Criteria


def criterion_1():
    rng = np.random.default_rng(ROOT_SEED)
    start = time.perf_counter()
    worst_resid = worst_excess = 0.0
    failures = 0
    solves = 0
    for k in range(200):
        p = (5, 10, 30)[k % 3]
        s = random_spd(rng, p, cond=10 ** rng.uniform(0, 4))
        for lam in (0.01, 0.1, 0.5):
            res = solve(s, SolverConfig(lam))
            rep = check_kkt(s, res.theta_hat, lam)
            solves += 1
            worst_resid = max(worst_resid, res.kkt_residual)
            worst_excess = max(worst_excess, rep.max_subgradient_excess)
            if not (res.converged and res.kkt_residual <= 1e-7 and rep.sign_violations == 0
                    and rep.max_subgradient_excess <= 1e-7):
                failures += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 60
    return ok, f"{solves} solves, {failures} failures, max residual {worst_resid:.2e}, max excess {worst_excess:.2e}, {elapsed:.1f}s"


def criterion_2():
    worst = 0.0
    for s12 in np.round(np.arange(-0.9, 0.9 + 1e-9, 0.1), 10):
        for lam in (0.05, 0.1, 0.3):
            s = SymMatrix([[1.0, s12], [s12, 1.0]])
            w12 = math.copysign(max(abs(s12) - lam, 0.0), s12)
            oracle = np.array([[1.0, -w12], [-w12, 1.0]]) / (1.0 - w12 * w12)
            worst = max(worst, norm_elem_max(solve(s, SolverConfig(lam)).theta_hat.array - oracle))
    return worst <= 1e-6, f"max |theta - oracle| = {worst:.2e} over 57 cases"


def criterion_3():
    errs = [abs((1 - diagnostics(build_diamond(r)).alpha) - 4 * r * (r + 1)) for r in (0.05, 0.1, 0.15, 0.2)]
    root = brentq(lambda r: diagnostics(build_diamond(r)).alpha, 0.1, 0.3, xtol=1e-12)
    closed_ok = max(errs) <= 1e-6
    root_ok = abs(root - 0.2017) <= 1e-3
    return closed_ok and root_ok, (
        f"closed form max err {max(errs):.1e} ({'ok' if closed_ok else 'bad'}); "
        f"root {root:.5f} vs 0.2017 ({'ok' if root_ok else 'off by ' + format(root - 0.2017, '.4f')})"
    )


def criterion_4():
    errs = [abs((1 - diagnostics(build_star(4, 3, r)).alpha) - r * (r + 2)) for r in (0.05, 0.1, 0.2, 0.3, 0.4)]
    root = brentq(lambda r: diagnostics(build_star(4, 3, r)).alpha, 0.3, 0.5, xtol=1e-12)
    ok = max(errs) <= 1e-6 and abs(root - 0.414) <= 1e-3
    return ok, f"closed form max err {max(errs):.1e}; root {root:.5f} vs 0.414"


def criterion_5():
    rng = np.random.default_rng(ROOT_SEED)
    sigma = SymMatrix.symmetrize(random_spd(rng, 3, 20))
    supports = [Support.diagonal(3), Support(3, [(0, 1)]), Support(3, [(0, 1), (1, 2)]), Support.full(3)]
    big = np.kron(sigma.array, sigma.array)
    mismatches = 0
    for sup in supports:
        blocks = gamma_blocks(sigma, sup)
        s_idx = [i * 3 + j for i, j in sup.pairs]
        sc_idx = [i * 3 + j for i in range(3) for j in range(3) if (i, j) not in sup]
        mismatches += int(not np.array_equal(blocks.gamma_ss, big[np.ix_(s_idx, s_idx)]))
        mismatches += int(not np.array_equal(blocks.gamma_scs, big[np.ix_(sc_idx, s_idx)]))
    return mismatches == 0, f"{len(supports)} supports, {mismatches} block mismatches (exact comparison)"


@functools.lru_cache(maxsize=None)
def chain_run(c: float):
    cfg = ExperimentConfig(
        "chain", (16, 32, 64), CHAIN_GRID, trials=50, lambda_rule=LambdaRule("practical", c),
        strengths=(0.2,), n_scale="logp", seed=ROOT_SEED, label="chain-stacking",
    )
    return run_model_selection(cfg)


def _stacking(c: float):
    table = chain_run(c)
    curves = table.curves()
    n50s = n50_by_curve(table)
    transitions = all(
        curve[0]["success_rate"] <= 0.1 and curve[-1]["success_rate"] >= 0.9 for curve in curves.values()
    )
    scaled = {k[1]: (v / math.log(k[1]) if v is not None else None) for k, v in n50s.items()}
    spread = relative_spread(list(scaled.values())) if None not in scaled.values() else math.inf
    text = ", ".join(f"p={p}: {'none' if v is None else format(v, '.0f')}" for p, v in scaled.items())
    return transitions and spread <= 0.25, transitions, spread, text


def criterion_6():
    start = time.perf_counter()
    ok, transitions, spread, text = _stacking(1.0)
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 600
    return ok, f"c=1: transition 0->1 {'yes' if transitions else 'no'}; n50/log p {text}; spread {spread:.2f}; {elapsed:.0f}s"


def companion_6():
    ok, transitions, spread, text = _stacking(3.0)
    return ok, f"c=3 (not gating): transition {'yes' if transitions else 'no'}; n50/log p {text}; spread {spread:.2f}"


def criterion_7():
    start = time.perf_counter()
    cfg = ExperimentConfig(
        "star", (32, 64), RATE_GRID, trials=50, lambda_rule=LambdaRule("practical", 1.0), strengths=(2.5,),
        hub_rule="tenth", strength_rule="per_degree", n_scale="logp", seed=ROOT_SEED, label="ellinf-rate",
    )
    table = run_ellinf_rate(cfg)
    slopes = {}
    for key, curve in table.curves().items():
        keep = [a for a in curve if a["n_over_logp"] >= 40]
        slopes[key[1]] = loglog_slope([a["n"] for a in keep], [a["ell_inf_mean"] for a in keep])
    elapsed = time.perf_counter() - start
    ok = all(-0.6 <= s <= -0.4 for s in slopes.values()) and elapsed < 600
    return ok, "slopes " + ", ".join(f"p={p}: {s:.3f}" for p, s in slopes.items()) + f"; {elapsed:.0f}s"


def criterion_8():
    cfg = ExperimentConfig(
        "star", (64,), DEGREE_GRID, trials=50, lambda_rule=LambdaRule("practical", 3.0), strengths=(2.5,),
        hub_degrees=(4, 8, 16), strength_rule="per_degree", n_scale="degree", seed=ROOT_SEED, label="degree",
    )
    n50s = {k[2]: v for k, v in n50_by_curve(run_degree_sweep(cfg)).items()}
    if None in n50s.values():
        return False, f"some curve never reaches 50%: {n50s}"
    raw = list(n50s.values())
    scaled = [v / d for d, v in n50s.items()]
    ratio = coefficient_of_variation(scaled) / coefficient_of_variation(raw)
    text = ", ".join(f"d={d}: {v:.0f}" for d, v in n50s.items())
    return ratio < 1, f"n50 {text}; CV(n50/d)/CV(n50) = {ratio:.3f}"


def criterion_9():
    n50 = n50_by_curve(chain_run(3.0))[("chain", 32, 0, 0.2)]
    if n50 is None:
        return False, "no n50 for the p=32 chain"
    n = int(round(4 * n50))
    model = build_chain(32, 0.2)
    diag = diagnostics(model)
    tail = TailModel.subgaussian(1.0, model.max_variance)
    lam = lambda_theory(diag.alpha, tail, n, 32, 3.0)
    feasible = violations = 0
    for t in range(50):
        s = sample_covariance(sample_gaussian(model, n, Seed(ROOT_SEED).child("witness-chain", t)))
        rep = witness_construct(model, s, lam, diag=diag)
        if rep.strict_dual_feasible:
            feasible += 1
            est = signed_edge_set(rep.full_result.theta_hat, model.zero_threshold)
            truth = model.signed_edges
            if any(truth.get(e) != sgn for e, sgn in est.items()):
                violations += 1
    ok = feasible >= 45 and violations == 0
    return ok, f"n={n} (4 x {n50:.0f}), lambda={lam:.3g}: strictly feasible {feasible}/50, false/mis-signed edges in {violations}"


def criterion_10():
    p, tau, n, trials = 32, 3.0, 100, 500
    model = build_chain(p, 0.2)
    tail = TailModel.subgaussian(1.0, model.max_variance)
    holds = sum(
        noise_event_check(model, sample_covariance(sample_gaussian(model, n, Seed(ROOT_SEED).child("noise", t))),
                          tail, n, p, tau).event_holds
        for t in range(trials)
    )
    q = 1 - 1 / p ** (tau - 2)
    se = math.sqrt(q * (1 - q) / trials)
    freq = holds / trials
    return freq >= q - 3 * se, f"frequency {freq:.3f} vs floor {q - 3 * se:.3f} (n={n}, {trials} trials)"


def criterion_11():
    model = build_chain(8, 0.3)
    deltas = [0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0]
    worst = -math.inf
    bad = 0
    for n in (50, 200):
        for row in empirical_tail_check(model, n, deltas, 500, Seed(ROOT_SEED).child("tail", n)):
            margin = row.emp_rate - (row.bound + 3 * row.std_error)
            worst = max(worst, margin)
            bad += margin > 0
    return bad == 0, f"{2 * len(deltas)} rows, {bad} above bound + 3 SE (worst margin {worst:.3f})"


def criterion_12():
    rng = np.random.default_rng(ROOT_SEED)
    models = [build_chain(16, 0.3), build_star(16, 4, 0.3), build_grid(4, 0.1)]
    violations = 0
    worst = 0.0
    for k in range(1000):
        model = models[k % 3]
        diag = diagnostics(model)
        mask = Support.from_model(model).mask
        g = rng.uniform(-1, 1, (model.p, model.p))
        delta = np.where(mask, (g + g.T) / 2, 0.0)
        delta *= rng.uniform(0, 1) / (3 * diag.k_sigma * diag.degree_d) / np.abs(delta).max()
        dinf = float(np.abs(delta).max())
        rem = norm_elem_max(remainder(model.theta_star, delta))
        bound = remainder_bound(diag.k_sigma, diag.degree_d, dinf)
        worst = max(worst, rem / bound if bound > 0 else 0.0)
        violations += rem > bound
    return violations == 0, f"1000 perturbations, {violations} violations, max ratio {worst:.3f}"


CRITERIA = [
    (1, "KKT optimality", criterion_1),
    (2, "2x2 closed form", criterion_2),
    (3, "diamond incoherence", criterion_3),
    (4, "star incoherence", criterion_4),
    (5, "Hessian Kronecker blocks", criterion_5),
    (6, "chain n/log p stacking", criterion_6),
    (7, "l_inf rate slope", criterion_7),
    (8, "degree rescaling", criterion_8),
    (9, "witness certificate", criterion_9),
    (10, "noise event rate", criterion_10),
    (11, "deviation tail bound", criterion_11),
    (12, "remainder bound", criterion_12),
]


@pytest.mark.parametrize("number,title,fn", CRITERIA, ids=[f"criterion_{n:02d}" for n, _, _ in CRITERIA])
def test_acceptance(number, title, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print()
        report(number, title, ok, detail)
        if number == 6:
            c_ok, c_detail = companion_6()
            report(6, "(companion, c=3)", c_ok, c_detail)
    assert ok, detail


if __name__ == "__main__":
    results = []
    for number, title, fn in CRITERIA:
        ok, detail = fn()
        report(number, title, ok, detail)
        if number == 6:
            report(6, "(companion, c=3)", *companion_6())
        results.append(ok)
    print(f"{sum(results)}/{len(results)} criteria pass")
