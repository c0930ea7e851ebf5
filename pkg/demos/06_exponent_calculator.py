"""Closed-form exponents and the potential's covariance structure."""

import numpy as np

from trapwalk import (ExponentInput, ModelParams, analytic_covariance, bar_xi,
                      feasibility, lower_bound_exponent, mc_covariance,
                      p2p_bound, sup_feasible_xi)
from trapwalk.exponents import covariance_slope, potential_variance

print("lower-bound volume exponent over a few parameter points (d=2):")
print("  alpha gamma   bar_xi  bound   sup_feasible  p2p")
for alpha, gamma in ((2.5, 0.3), (2.2, 0.1), (3.0, 1.0), (2.0, 1.5)):
    inp = ExponentInput(2, alpha, gamma)
    print(f"  {alpha:5.2f} {gamma:5.2f}  {bar_xi(inp):.4f}  "
          f"{lower_bound_exponent(inp):.4f}  {sup_feasible_xi(inp):.4f}      "
          f"{p2p_bound(inp):.4f}")

inp = ExponentInput(2, 2.5, 0.3)
print("\nfeasibility of candidate tube exponents for (2, 2.5, 0.3):")
for xi in (0.5, 0.6, 0.65, 0.67, 0.7):
    gain_ok, tilt_ok = feasibility(inp, xi)
    print(f"  xi={xi:.2f}: gain beats cost {gain_ok}, tilt admissible {tilt_ok}")

params = ModelParams(d=2, alpha=3.0, gamma=1.0, lam=0.5, r_max=50.0)
print(f"\npotential variance (d=2, alpha=3, gamma=1, r_max=50): "
      f"{potential_variance(params):.4f}")
print("covariance of V at distance s, Campbell integral vs Monte Carlo:")
for s in (0.0, 2.0, 5.0):
    ref = analytic_covariance(params, s)
    est = mc_covariance(params, s, 2000, master_seed=12)
    print(f"  s={s:3.0f}: analytic {ref:.4f}, MC {est.mean:.4f} "
          f"+- {est.stderr:.4f}")

heavy = ModelParams(d=1, alpha=1.5, gamma=1.0, lam=0.5, r_max=1e4)
slope = covariance_slope(heavy, np.geomspace(10, 100, 12))
print(f"\nlog-log covariance slope for (d=1, alpha=1.5, gamma=1): "
      f"{slope:.3f} (exactly d - alpha - 2 gamma = -2.5)")
