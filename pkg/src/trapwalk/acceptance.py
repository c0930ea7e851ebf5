"""The validation battery: one function per acceptance criterion.

Each function runs a fixed-seed experiment against its closed-form oracle
and returns a :class:`CriterionResult`; the pytest suite asserts on these
and the ``validate`` CLI subcommand prints one line per criterion.  The
superdiffusive-trend check is a diagnostic (``hard=False``): at desk scale
its effective sample sizes collapse, so it is reported, not gated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .exponents import (ExponentInput, analytic_covariance, bar_xi,
                        covariance_slope, mc_covariance, p2p_bound,
                        sup_feasible_xi)
from .field import ModelParams, Trap, TrapField, Window, sample_field
from .rng import split_seed, substream
from .sampler import (PathConfig, estimate_Z, measure_fluctuation,
                      rotation_exchange_test, tube_window)
from .tilt import TiltSpec, paired_tilt_comparison, rn_derivative, sample_tilt

FLOAT_GUARD = 1e-12  # absolute slack for zero-variance comparisons


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    detail: str
    hard: bool = True

    def line(self) -> str:
        status = "PASS" if self.passed else ("FAIL" if self.hard else "SOFT-FAIL")
        return f"[{status}] {self.name}: {self.detail}"


def free_partition_function(threads: int = 1) -> CriterionResult:
    """MC partition function for free motion vs the hitting-time transform."""
    params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=4.0)
    cfg = PathConfig(L=2.0, xi=0.5, dt=1e-2)
    fld = TrapField.empty(params, tube_window(2.0, 0.5, 2))
    est = estimate_Z(fld, cfg, 100_000, "ALL", seed=101, threads=threads)
    exact = math.exp(-2.0 * math.sqrt(2.0 * params.lam))
    err = abs(est.mean - exact)
    ok = err <= 3.0 * est.stderr + FLOAT_GUARD and est.stderr <= 0.02 * est.mean
    return CriterionResult(
        "free partition function",
        ok,
        f"Z={est.mean:.6f} exact={exact:.6f} stderr={est.stderr:.2e} n={est.n}",
    )


def diffusive_baseline_slope(threads: int = 1) -> CriterionResult:
    """Transversal fluctuation exponent of the free motion."""
    params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=4.0)
    rep = measure_fluctuation(params, [8, 16, 32, 64, 128], 0.5, 12_000,
                              master_seed=20, with_traps=False,
                              fields_per_point=1, threads=threads)
    ok = abs(rep.slope - 0.5) <= 0.05
    return CriterionResult(
        "diffusive baseline slope",
        ok,
        f"slope={rep.slope:.4f} (target 0.50 +- 0.05, "
        f"bootstrap CI [{rep.slope_ci[0]:.4f}, {rep.slope_ci[1]:.4f}])",
    )


def _tilt_spec() -> TiltSpec:
    params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=48.0)
    return TiltSpec(L=100.0, xi=0.6, params=params)


def change_of_measure_normalization(threads: int = 1) -> CriterionResult:
    """Mean density of the tilted law over base fields equals one."""
    spec = _tilt_spec()
    window = Window([49.0, -9.0], [101.0, 9.0])
    n = 10_000
    vals = np.empty(n)
    for i in range(n):
        seed = int(substream(0, 21, i).integers(2 ** 62))
        vals[i] = rn_derivative(sample_field(spec.params, window, seed), spec)
    se = float(vals.std(ddof=1) / math.sqrt(n))
    identity_gap = abs(spec.intensity * spec.region_volume * spec.band_width
                       - spec.lambda_hat)
    ok = abs(vals.mean() - 1.0) <= 3.0 * se and identity_gap <= 1e-12 * spec.lambda_hat
    return CriterionResult(
        "change-of-measure normalization",
        ok,
        f"mean={vals.mean():.4f} stderr={se:.4f} over {n} fields; "
        f"intensity*volume identity gap={identity_gap:.2e}",
    )


def tilt_count_law(threads: int = 1) -> CriterionResult:
    """Added-trap counts are Poisson(lambda_hat)."""
    spec = _tilt_spec()
    n = 10_000
    counts = np.array([sample_tilt(spec, s)[1].shape[0] for s in range(n)],
                      dtype=float)
    lam_hat = spec.lambda_hat
    se_mean = counts.std(ddof=1) / math.sqrt(n)
    var = counts.var(ddof=1)
    m4 = float(np.mean((counts - counts.mean()) ** 4))
    se_var = math.sqrt(max(m4 - var ** 2, 0.0) / n)
    ok = (abs(counts.mean() - lam_hat) <= 3.0 * se_mean
          and abs(var - lam_hat) <= 3.0 * se_var)
    return CriterionResult(
        "tilt count law",
        ok,
        f"mean={counts.mean():.4f} var={var:.4f} lambda_hat={lam_hat:.4f}",
    )


def slab_coverage(threads: int = 1) -> CriterionResult:
    """Every sampled tilt trap covers a full tube slab."""
    from .tilt import slab_coverage_check
    spec = _tilt_spec()
    total = 0
    failures = 0
    seed = 0
    min_margin = math.inf
    while total < 10_000:
        centers, radii = sample_tilt(spec, seed)
        seed += 1
        for c, r in zip(centers, radii):
            res = slab_coverage_check(spec, Trap(tuple(c), float(r)))
            total += 1
            min_margin = min(min_margin, res.margin)
            if not res.covered:
                failures += 1
    ok = failures == 0
    return CriterionResult(
        "slab coverage",
        ok,
        f"{failures} failures in {total} traps (min margin {min_margin:.3f})",
    )


def pathwise_monotonicity(threads: int = 1) -> CriterionResult:
    """Tilted weights never exceed base weights, path by path."""
    params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=64.0)
    L, xi = 24.0, 0.6
    spec = TiltSpec(L=L, xi=xi, params=params)
    window = tube_window(L, xi, 2)
    fld = sample_field(params, window, 5150)
    cfg = PathConfig(L=L, xi=xi, dt=1e-2)
    res = paired_tilt_comparison(fld, spec, cfg, 2_000, seed=31,
                                 tilt_seed=17, threads=threads)
    ok = (res.pathwise_violations == 0 and res.log_diff >= -FLOAT_GUARD
          and res.avoidance_weight_equal)
    return CriterionResult(
        "pathwise tilt monotonicity",
        ok,
        f"violations={res.pathwise_violations} logdiff={res.log_diff:.4f} "
        f"added={res.n_added} avoidance-equal={res.avoidance_weight_equal}",
    )


def heat_kernel_validation(threads: int = 1) -> CriterionResult:
    """Eigen-series vs killed-walk histogram, and the envelope upper bound."""
    t, x0 = 0.2, 0.5
    n_walks, n_steps = 1_000_000, 200
    dt = t / n_steps
    rng = split_seed(7070, 0)
    alive_pos = np.full(n_walks, x0)
    alive = np.ones(n_walks, bool)
    sdt = math.sqrt(dt)
    for _ in range(n_steps):
        z = rng.standard_normal(n_walks)
        u = rng.random(n_walks)
        new = alive_pos + sdt * z
        crossed = (new <= 0.0) | (new >= 1.0)
        with np.errstate(over="ignore"):
            p_hit = (np.exp(-2.0 * np.maximum(alive_pos, 0) * np.maximum(new, 0) / dt)
                     + np.exp(-2.0 * np.maximum(1 - alive_pos, 0)
                              * np.maximum(1 - new, 0) / dt))
        bridge = u < p_hit
        alive &= ~(crossed | bridge)
        alive_pos = np.where(alive, new, alive_pos)
    survivors = alive_pos[alive]

    edges = np.arange(0.15, 0.85 + 1e-9, 0.05)
    hist, _ = np.histogram(survivors, bins=edges)
    dens = hist / n_walks / np.diff(edges)
    worst = 0.0
    for k in range(len(edges) - 1):
        # 3-point Simpson average of the kernel over the bin
        a, b = edges[k], edges[k + 1]
        vals = [kernels.dirichlet_kernel_unit(x0, y, t) for y in (a, (a + b) / 2, b)]
        ref = (vals[0] + 4 * vals[1] + vals[2]) / 6.0
        worst = max(worst, abs(dens[k] - ref) / ref)
    mc_ok = worst <= 0.02

    rng2 = split_seed(7071, 0)
    failures = 0
    for _ in range(1000):
        x = float(rng2.uniform(-0.5, 0.5))
        y = float(rng2.uniform(-0.5, 0.5))
        tt = float(rng2.uniform(0.02, 5.0))
        rep = kernels.kernel_bounds_check(
            kernels.KernelQuery((x,), (y,), tt), 1.0)
        if not rep.upper_ok:
            failures += 1
    ok = mc_ok and failures == 0
    return CriterionResult(
        "heat kernel",
        ok,
        f"max relative bin error={worst:.4f} (tol 0.02, {len(survivors)} "
        f"survivors); upper-bound failures={failures}/1000",
    )


def hitting_time_law(threads: int = 1) -> CriterionResult:
    """Level hitting cdf against its stated value and against walk maxima."""
    val = kernels.hitting_time_cdf(1.0, 1.0)
    exact_ok = abs(val - 0.317311) <= 1e-6

    n, steps = 200_000, 200
    dt = 1.0 / steps
    sdt = math.sqrt(dt)
    rng = split_seed(8080, 0)
    hit = np.zeros(n, bool)
    pos = np.zeros(n)
    for _ in range(steps):
        z = rng.standard_normal(n)
        u = rng.random(n)
        new = pos + sdt * z
        crossed = new >= 1.0
        with np.errstate(over="ignore"):
            p = np.exp(-2.0 * np.maximum(1 - pos, 0) * np.maximum(1 - new, 0) / dt)
        hit |= crossed | (u < p)
        pos = new
    freq = hit.mean()
    se = math.sqrt(freq * (1 - freq) / n)
    mc_ok = abs(freq - val) <= 3.0 * se
    return CriterionResult(
        "hitting-time law",
        exact_ok and mc_ok,
        f"cdf(1,1)={val:.7f} (target 0.317311); walk maxima freq={freq:.5f} "
        f"+- {se:.5f}",
    )


def exponent_calculator(threads: int = 1) -> CriterionResult:
    """Closed forms vs bisection on a parameter grid, and the algebra checks."""
    worst_sup = 0.0
    worst_branch = 0.0
    worst_p2p = 0.0
    count = 0
    for d in range(1, 21):
        for a_off in np.linspace(-0.8, 4.0, 20):
            alpha = d + a_off
            if alpha <= 0.05:
                continue
            for g_off in np.linspace(0.05, 4.0, 20):
                gamma = max(0.0, d - alpha) + g_off
                inp = ExponentInput(d, float(alpha), float(gamma))
                count += 1
                closed = min(3.0 / (3.0 + alpha + 2 * gamma - d),
                             1.0 / (alpha + 1.0 - d) if alpha + 1 - d > 0 else 1.0,
                             1.0)
                worst_sup = max(worst_sup, abs(sup_feasible_xi(inp) - closed))
                xi = p2p_bound(inp)
                worst_p2p = max(worst_p2p, abs(
                    ((d + 1 - alpha - 2 * gamma) * xi + 1) / 2.0 - xi))
    for d in (1, 2, 3):
        for alpha in np.linspace(d + 0.1, d + 3.0, 20):
            gamma = alpha - d
            b1 = 1.0 / (alpha - d + 1.0)
            b2 = 3.0 / (3.0 + alpha + 2 * gamma - d)
            worst_branch = max(worst_branch, abs(b1 - b2))
    ok = worst_sup <= 1e-9 and worst_branch <= 1e-12 and worst_p2p <= 1e-12
    return CriterionResult(
        "exponent calculator",
        ok,
        f"{count} grid points; max |bisection-closed|={worst_sup:.2e}, "
        f"branch gap={worst_branch:.2e}, fixed-point residual={worst_p2p:.2e}",
    )


def covariance_validation(threads: int = 1) -> CriterionResult:
    """MC covariance vs the overlap integral, and its log-log slope."""
    params = ModelParams(d=2, alpha=3.0, gamma=1.0, lam=0.5, r_max=50.0)
    zs = []
    for s in (0.0, 2.0, 5.0):
        est = mc_covariance(params, s, 10_000, master_seed=909)
        ref = analytic_covariance(params, s)
        zs.append((s, (est.mean - ref) / est.stderr, est.mean, ref))
    mc_ok = all(abs(z) <= 3.0 for _, z, _, _ in zs)

    slope_params = ModelParams(d=1, alpha=1.5, gamma=1.0, lam=0.5, r_max=1e4)
    slope = covariance_slope(slope_params, np.geomspace(10.0, 100.0, 16))
    target = slope_params.d - slope_params.alpha - 2 * slope_params.gamma
    slope_ok = abs(slope - target) <= 0.1
    ztxt = " ".join(f"s={s:g}:z={z:+.2f}" for s, z, _, _ in zs)
    return CriterionResult(
        "potential covariance",
        mc_ok and slope_ok,
        f"{ztxt}; slope={slope:.3f} target={target:g}",
    )


def rotation_exchangeability(threads: int = 1) -> CriterionResult:
    """Uniformity of the argmax over rotated environments."""
    params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=8.0)
    rep = rotation_exchange_test(params, L=16.0, xi=0.6, N=1, n_fields=200,
                                 n_paths=96, master_seed=660, dt=2e-2,
                                 threads=threads)
    ok = rep.within_3_sigma and rep.n_ties == 0
    return CriterionResult(
        "rotation exchangeability",
        ok,
        f"center-max freq={rep.center_max_freq:.3f} expected="
        f"{rep.expected_freq:.3f} z={rep.zscore:+.2f} ties={rep.n_ties} "
        f"counts={rep.argmax_counts}",
    )


def superdiffusive_trend(threads: int = 1) -> CriterionResult:
    """Diagnostic: correlated-regime slope vs the paired free baseline.

    Not a hard gate: the weighted estimates collapse to a handful of
    effective samples at these sizes, so a shortfall is recorded as a
    scale limitation.
    """
    params = ModelParams(d=2, alpha=2.2, gamma=0.1, lam=0.5, r_max=32.0)
    grid = [16, 32, 64, 128]
    xi = bar_xi(ExponentInput(2, 2.2, 0.1))
    base = measure_fluctuation(params, grid, xi, 384, master_seed=77,
                               with_traps=False, fields_per_point=4,
                               threads=threads)
    trap = measure_fluctuation(params, grid, xi, 384, master_seed=77,
                               with_traps=True, fields_per_point=4,
                               threads=threads)
    gap = trap.slope - base.slope
    ok = gap >= 0.05
    detail = (
        f"trap slope={trap.slope:.3f} (CI [{trap.slope_ci[0]:.3f}, "
        f"{trap.slope_ci[1]:.3f}]), baseline={base.slope:.3f}, gap={gap:+.3f} "
        f"(diagnostic target >= 0.05); min ess={min(r.ess for r in trap.rows):.1f}"
    )
    return CriterionResult("superdiffusive trend (diagnostic)", ok, detail,
                           hard=False)


CRITERIA: tuple[tuple[str, Callable[[int], CriterionResult]], ...] = (
    ("1", free_partition_function),
    ("2", diffusive_baseline_slope),
    ("3", change_of_measure_normalization),
    ("4", tilt_count_law),
    ("5", slab_coverage),
    ("6", pathwise_monotonicity),
    ("7", heat_kernel_validation),
    ("8", hitting_time_law),
    ("9", exponent_calculator),
    ("10", covariance_validation),
    ("11", rotation_exchangeability),
    ("12", superdiffusive_trend),
)


def run_all(threads: int = 1, skip: tuple[str, ...] = ()) -> list[CriterionResult]:
    out = []
    for key, fn in CRITERIA:
        if key in skip:
            continue
        out.append(fn(threads))
    return out
