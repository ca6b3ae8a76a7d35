"""Success probability of exact graph recovery versus rescaled sample size.

For chain graphs, plotting the recovery probability against ``n / log p``
makes curves for different ``p`` line up. This runs a small version of that
experiment (10 trials per point) and prints ``n50 / log p`` per graph size.
"""

import numpy as np

from sparseprec.harness import ExperimentConfig, n50_by_curve, run_model_selection

cfg = ExperimentConfig(
    family="chain",
    p_list=(16, 32),
    n_grid=tuple(100 * 2 ** (k / 2) for k in range(8)),
    n_scale="logp",
    trials=10,
    lambda_rule="practical:3",
    strengths=(0.2,),
    seed=11,
)
table = run_model_selection(cfg)
for a in table.aggregates():
    print(f"p = {a['p']:3d}  n = {a['n']:6d}  n/log p = {a['n'] / np.log(a['p']):7.1f}  success = {a['success_rate']:.2f}")
for key, n in n50_by_curve(table).items():
    p = key[1]
    print(f"p = {p}: n50 / log p = {n / np.log(p):.0f}" if n else f"p = {p}: no 50% crossing")
