"""
The power-law tail of the perpetuity
======================================

Chaining cycles gives the perpetuity ``Y = Q1 + M1 Q2 + M1 M2 Q3 + ...``
whose upper tail decays like ``u**-beta``. This script simulates ``Y`` and
compares Hill and log-log estimates of the exponent with the analytic root.
"""

import argparse
import time

import numpy as np

from ruintail import SimConfig, reference_model, simulate_paths, solve_beta, tail_report

parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
parser.add_argument("--paths", type=int, default=200_000)
parser.add_argument("--seed", type=int, default=1)
parser.add_argument("--workers", type=int, default=1)
args = parser.parse_args()

spec = reference_model()
beta = solve_beta(spec.regimes).beta

t0 = time.perf_counter()
batch = simulate_paths(spec, SimConfig(seed=args.seed, n_paths=args.paths, workers=args.workers))
print(f"{args.paths} paths in {time.perf_counter() - t0:.1f} s, "
      f"{batch.n_cycles.mean():.1f} cycles per path on average")
print(f"P(Y > 0) = {np.mean(batch.y_inf > 0):.4f}")

rep = tail_report(batch.y_inf, beta)
print(f"\nanalytic beta {beta:.4f}")
print(f"Hill          {rep.beta_hat_hill:.4f} (k = {rep.k_used})")
for label, value in rep.hill_sweep.items():
    print(f"  k = {label:<6} {value:.4f}")
print(f"log-log OLS   {rep.beta_hat_ols:.4f} (r2 = {rep.ols.r2:.4f})")

# u**beta * P(Y > u) should level off; its height estimates the Goldie constant.
print("\n       u   u^beta G(u)")
for u, v in zip(rep.plateau.u, rep.plateau.values):
    print(f"{u:8.2f}   {v:.4f}")
print(f"plateau max/min {rep.plateau.spread:.2f} ({'stable' if rep.plateau.stable else 'unstable'})")
