"""
The ruin exponent of a regime-switching investment
====================================================

A reserve invested in an asset whose drift and volatility switch between two
regimes has ruin probability decaying like ``u**-beta``. ``beta`` is the root
of a cubic sitting between the exponents ``beta_k = 2 a_k / sigma_k**2 - 1``
the asset would have if it never left regime ``k``.
"""

import numpy as np

from ruintail import RegimeParams, cubic_coefficients, mgf_f, solve_beta
from ruintail.model import REFERENCE_REGIMES

# The worked example: unit volatility and switching rates, drifts 1 and 2,
# so beta0 = 1 and beta1 = 3.
regimes = REFERENCE_REGIMES
print("beta0, beta1 =", regimes.beta0, regimes.beta1)
print("cubic coefficients:", cubic_coefficients(regimes))

sol = solve_beta(regimes)
print(f"beta = {sol.beta:.15f} after {sol.iterations} iterations")
print(f"|f(beta) - 1| = {sol.residual_f:.1e}")

# f(q) = E M**q over one regime cycle; it dips below 1 at beta0 and climbs
# back to 1 at beta, then blows up before beta1 (here at q = 2).
for q in (0.0, 0.5, 1.0, sol.beta, 1.9, 2.0, 2.5):
    v = mgf_f(q, regimes)
    print(f"  f({q:.3f}) = {v.value:.6f}" if v.in_domain else f"  f({q:.3f}) diverges")

# Spending more time in the calm regime pushes beta towards beta1: lambda01
# is the rate of leaving regime 0, so a large value makes regime 0 fleeting.
print("\nlambda01    beta")
for lam in np.geomspace(0.01, 100, 9):
    r = RegimeParams(a0=1.0, a1=2.0, sigma0=1.0, sigma1=1.0, lambda01=lam, lambda10=1.0)
    print(f"{lam:8.3g}  {solve_beta(r).beta:.6f}")
