"""
Ruin probabilities and the perpetuity sandwich
===============================================

The reserve started at ``u`` is ruined when ``Y`` ever reaches ``u``. Since
``Y`` converges, ruin is at least as likely as ``Y_inf > u``, and at most that
tail divided by ``min(P(Y_inf^0 > 0), P(Y_inf^1 > 0))``. Both bounds come from
the same simulated paths.
"""

import argparse

from ruintail import SimConfig, estimate_ruin, reference_model

parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
parser.add_argument("--paths", type=int, default=100_000)
parser.add_argument("--seed", type=int, default=1)
args = parser.parse_args()

u_grid = [1, 2, 5, 10, 20, 50, 100]
est = estimate_ruin(reference_model(), SimConfig(seed=args.seed, n_paths=args.paths), u_grid)
print(f"G0(0) = {est.g0[0]:.4f}, G1(0) = {est.g0[1]:.4f}")

for i in (0, 1):
    print(f"\nstarting in regime {i}")
    print(f"{'u':>6} {'lower':>10} {'psi_hat':>10} {'upper':>10}  holds")
    for u, lo, p, hi, ok in zip(est.u_grid, est.sandwich_low(i), est.psi_hat[i], est.sandwich_high(i),
                                est.sandwich_holds(i)):
        print(f"{u:6g} {lo:10.2e} {p:10.2e} {hi:10.2e}  {'yes' if ok else 'NO'}")
