"""Estimate a sparse precision matrix from simulated chain data.

Run with ``python demos/01_solve_basics.py``.
"""

import numpy as np

from sparseprec import SolverConfig, build_chain, check_kkt, solve
from sparseprec.models import edges_of
from sparseprec.sampling import Seed, sample_covariance, sample_gaussian

# A chain graph on 8 nodes: the precision matrix is tridiagonal.
model = build_chain(8, 0.3)
print("true edges:", sorted(model.edges))

# Draw 400 samples and form the (uncentered) sample covariance.
data = sample_gaussian(model, 400, Seed(1))
s = sample_covariance(data)

# Penalize off-diagonal entries with lambda = 3 sqrt(log p / n).
lam = 3 * np.sqrt(np.log(8) / 400)
res = solve(s, SolverConfig(lam))
print(f"lambda = {lam:.4f}, sweeps = {res.sweeps}, KKT residual = {res.kkt_residual:.2e}")
print("estimated edges:", sorted(edges_of(res.theta_hat.array)))

# The optimality certificate can be audited independently of the solver.
report = check_kkt(s, res.theta_hat, lam)
print("KKT audit passes:", report.ok(1e-7))

np.set_printoptions(precision=3, suppress=True)
print("theta_hat:\n", res.theta_hat.array)
