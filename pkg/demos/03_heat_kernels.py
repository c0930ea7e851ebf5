"""Dirichlet heat kernels and hitting laws used as sampler oracles."""

from trapwalk import (KernelQuery, dirichlet_kernel_box, dirichlet_kernel_unit,
                      hitting_time_cdf, kernel_bounds_check, slab_exit_tail)

print("killed transition density on (0,1), started at 1/2:")
for t in (0.05, 0.2, 1.0):
    vals = [dirichlet_kernel_unit(0.5, y, t) for y in (0.25, 0.5, 0.75)]
    print(f"  t={t:4.2f}: p(1/2 -> 1/4)={vals[0]:.4f}  "
          f"p(1/2 -> 1/2)={vals[1]:.4f}  p(1/2 -> 3/4)={vals[2]:.4f}")

print("\nenvelope bounds at a few queries (width 1):")
for t in (0.1, 0.5, 2.5):
    rep = kernel_bounds_check(KernelQuery((0.1,), (-0.2,), t), 1.0)
    low = "n/a (small t)" if rep.lower_ok is None else str(rep.lower_ok)
    print(f"  t={t:4.1f}: value={rep.value:.3e} <= {rep.upper_bound:.3e} "
          f"(upper ok {rep.upper_ok}, lower ok {low})")

print("\ntwo-dimensional box kernel is the product of interval kernels:")
q = KernelQuery((0.1, -0.3), (0.0, 0.2), 0.4)
print(f"  p_0.4((0.1,-0.3) -> (0.0,0.2)) on width 2: "
      f"{dirichlet_kernel_box(q, 2.0, 2):.5f}")

print("\nlevel hitting law P(tau_r <= s):")
for r, s in ((1.0, 1.0), (2.0, 1.0), (1.0, 4.0)):
    print(f"  r={r:.0f}, s={s:.0f}: {hitting_time_cdf(r, s):.6f}")

print("\nslab exit tail, asymptotic vs reflection series:")
for ratio in (2.0, 3.0, 4.0):
    res = slab_exit_tail(ratio, 1.0)
    print(f"  halfwidth/sqrt(t)={ratio:.0f}: asymptotic {res.asymptotic:.3e}, "
          f"exact {res.exact:.3e}")
