"""Incoherence of small graphs and where it breaks down.

The estimator recovers the graph reliably only when ``alpha > 0``. For the
diamond and the 3-spoke star, ``1 - alpha`` has a simple closed form in the
edge correlation, so the breakdown point can be located exactly.
"""

import numpy as np
from scipy.optimize import brentq

from sparseprec import build_diamond, build_star
from sparseprec.theory import diagnostics

print(" rho   diamond 1-alpha  4r(r+1)   star 1-alpha  r(r+2)")
for r in (0.05, 0.1, 0.15, 0.2):
    d = diagnostics(build_diamond(r))
    st = diagnostics(build_star(4, 3, r))
    print(f"{r:4.2f}   {1 - d.alpha:14.6f}  {4 * r * (r + 1):8.6f}   {1 - st.alpha:11.6f}  {r * (r + 2):7.6f}")

root_d = brentq(lambda r: diagnostics(build_diamond(r)).alpha, 0.1, 0.3)
root_s = brentq(lambda r: diagnostics(build_star(4, 3, r)).alpha, 0.3, 0.5)
print(f"diamond loses incoherence at rho = {root_d:.5f} ((sqrt 2 - 1) / 2 = {(np.sqrt(2) - 1) / 2:.5f})")
print(f"star loses incoherence at rho = {root_s:.5f} (sqrt 2 - 1 = {np.sqrt(2) - 1:.5f})")

# The other constants that drive the sample-size requirement.
d = diagnostics(build_diamond(0.1))
print(f"diamond(0.1): K_Sigma = {d.k_sigma:.3f}, K_Gamma = {d.k_gamma:.3f}, K = {d.complexity_K:.1f}")
