"""Solve the baseline model and print the headline numbers.

Run from the repo root:  python3 demos/baseline_run.py
"""

import numpy as np

from wealthtrap import (Calibration, build_report, euler_decomposition,
                        solve_hjb, solve_kfe)

cal = Calibration()
print(cal)
print()

sol = solve_hjb(cal)
print(f"HJB converged: {sol.report.converged} in {sol.report.iterations} sweeps "
      f"(final change {sol.report.errors[-1]:.2e})")
print(f"signal threshold k* = {sol.signal.kstar:.4f} "
      f"(node {sol.signal.kstar_index}, {sol.signal.flags.sum()} flagged nodes)")
print(f"waiting band width k* - phi = {sol.signal.kstar - cal.phi:.4f}")

den = solve_kfe(sol, cal)
rep = build_report(sol, den, cal)

print()
print(f"long-run attractors:  k_ss_L = {rep.kss_L:.4f}   k_ss_H = {rep.kss_H:.4f}")
print(f"deterministic twins:          {rep.kss_L_det:.4f}            {rep.kss_H_det:.4f}")
print(f"regime shares (L, W, H) = ({rep.shares[0]:.4f}, {rep.shares[1]:.4f}, "
      f"{rep.shares[2]:.4f})")
print(f"mean wealth {rep.mean_wealth:.3f}   gini {rep.gini:.4f}")
print(f"density peaks at k = {[round(k, 3) for k, _ in rep.peaks]}")

print()
print("phenotypes:")
for name, share in rep.phenotype_shares.items():
    print(f"  {name:24s} {100 * share:7.2f}%")

# Euler decomposition at each attractor: the bracket should wash out to ~0
print()
for regime, kss in (("L", rep.kss_L), ("H", rep.kss_H)):
    terms = euler_decomposition(sol.policies, sol.values, cal, sol.grid,
                                kss, regime, signal=sol.signal)
    print(f"Euler bracket at k_ss_{regime}: ramsey {terms.ramsey:+.5f}  "
          f"precautionary {terms.precautionary:+.5f}  "
          f"switching {terms.switching:+.5f}  ->  sum {terms.bracket_sum:+.5f}")

print()
print(f"MPC at attractors: L {rep.mpc_at['L']:.4f}  H {rep.mpc_at['H']:.4f}")
print(f"APC at attractors: L {rep.apc_at['L']:.4f}  H {rep.apc_at['H']:.4f}")
w = rep.weighted_mpc
print(f"population-weighted MPC: L {w['L']:.4f}  W {w['W']:.4f}  H {w['H']:.4f}  "
      f"aggregate {w['aggregate']:.4f}")
