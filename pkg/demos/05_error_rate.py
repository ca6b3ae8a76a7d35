"""Elementwise error decays like ``n^(-1/2)``.

Fit the log-log slope of the mean max-entry error of ``theta_hat`` against
``n`` on a chain graph.
"""

from sparseprec.harness import ExperimentConfig, loglog_slope, run_ellinf_rate

cfg = ExperimentConfig(
    family="chain",
    p_list=(16,),
    n_grid=(400, 1600, 6400, 25600),
    trials=8,
    lambda_rule="practical:1",
    seed=3,
)
agg = run_ellinf_rate(cfg).aggregates()
for a in agg:
    print(f"n = {a['n']:6d}  mean ell_inf error = {a['ell_inf_mean']:.4f}")
print(f"log-log slope = {loglog_slope([a['n'] for a in agg], [a['ell_inf_mean'] for a in agg]):.2f} (reference -0.5)")
