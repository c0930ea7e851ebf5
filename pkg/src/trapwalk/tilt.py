"""Environment tilting: an extra layer of wide traps with exact likelihoods.

The tilted environment adds a Poisson layer of traps whose centers fall in
the block ahead of the walker (first-coordinate span [L/2, L], or
[L/4, 3L/4] in point-to-point mode) and whose radii lie in
[sqrt(d) L^xi, 2 sqrt(d) L^xi], wide enough that every tube-confined
trajectory must cross each of them.  The density of the tilted law against
the base law is an explicit product over the base points in that block and
radius band, so tilted expectations can be estimated by reweighting base
samples and vice versa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .field import ModelParams, Trap, TrapField
from .rng import split_seed
from .sampler import BALL, HYPERPLANE, Estimate, PathConfig, run_paths


class TiltError(ValueError):
    pass


@dataclass(frozen=True)
class TiltSpec:
    """Geometry and intensity of the added trap layer for given (L, xi).

    kappa is the intensity exponent: the layer has density L^-kappa on
    block x band, giving a Poisson(lambda_hat) total count.  Requires
    (d - 1 - alpha) xi + 1 > 0, otherwise the added layer would overwhelm
    the base fluctuations and the two laws would separate.
    """

    L: float
    xi: float
    params: ModelParams
    mode: str = HYPERPLANE

    def __post_init__(self):
        if not self.L > 0:
            raise TiltError("L must be positive")
        if not 0 < self.xi < 1:
            raise TiltError("xi must lie in (0, 1)")
        if self.mode not in (HYPERPLANE, BALL):
            raise TiltError(f"unknown mode {self.mode!r}")
        d, alpha = self.params.d, self.params.alpha
        if not (d - 1 - alpha) * self.xi + 1 > 0:
            raise TiltError(
                f"(d-1-alpha) xi + 1 = {(d - 1 - alpha) * self.xi + 1:g} "
                "must be positive for an absolutely continuous tilt"
            )
        lam_hat = self.intensity * self.region_volume * self.band_width
        if abs(lam_hat - self.lambda_hat) > 1e-12 * max(1.0, self.lambda_hat):
            raise TiltError("internal intensity/volume identity violated")

    @property
    def kappa(self) -> float:
        d, alpha = self.params.d, self.params.alpha
        return ((d + 1 + alpha) * self.xi + 1) / 2.0

    @property
    def intensity(self) -> float:
        return self.L ** -self.kappa

    @property
    def region_span(self) -> tuple[float, float]:
        if self.mode == BALL:
            return self.L / 4.0, 3.0 * self.L / 4.0
        return self.L / 2.0, self.L

    @property
    def region_halfwidth(self) -> float:
        return self.L ** self.xi / 2.0

    @property
    def region_volume(self) -> float:
        lo, hi = self.region_span
        return (hi - lo) * (self.L ** self.xi) ** (self.params.d - 1)

    @property
    def radius_band(self) -> tuple[float, float]:
        sqd = math.sqrt(self.params.d)
        return sqd * self.L ** self.xi, 2.0 * sqd * self.L ** self.xi

    @property
    def band_width(self) -> float:
        lo, hi = self.radius_band
        return hi - lo

    @property
    def lambda_hat(self) -> float:
        d, alpha = self.params.d, self.params.alpha
        expo = ((d - 1 - alpha) * self.xi + 1) / 2.0
        return math.sqrt(d) / 2.0 * self.L ** expo

    def in_region_band(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        lo, hi = self.region_span
        rlo, rhi = self.radius_band
        half = self.region_halfwidth
        ok = (centers[:, 0] >= lo) & (centers[:, 0] <= hi)
        for j in range(1, self.params.d):
            ok &= np.abs(centers[:, j]) <= half
        return ok & (radii >= rlo) & (radii <= rhi)


def sample_tilt(spec: TiltSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw the added trap layer: Poisson count, uniform centers and radii.

    Returns (centers, radii).
    """
    rng = split_seed(seed, 0)
    n = rng.poisson(spec.lambda_hat)
    lo, hi = spec.region_span
    half = spec.region_halfwidth
    d = spec.params.d
    lower = np.array([lo] + [-half] * (d - 1))
    upper = np.array([hi] + [half] * (d - 1))
    centers = rng.uniform(lower, upper, size=(n, d))
    rlo, rhi = spec.radius_band
    radii = rng.uniform(rlo, rhi, size=n)
    return centers, radii


def rn_derivative(field: TrapField, spec: TiltSpec) -> float:
    """Density of the tilted law at a base realization.

    Product over base traps with center in the block and radius in the band
    of (1 + r^(1+alpha) L^-kappa / alpha), times exp(-lambda_hat).  Averages
    to one over base fields.
    """
    if field.params.r_max < spec.radius_band[1]:
        raise TiltError(
            f"field r_max {field.params.r_max:g} does not cover the radius "
            f"band top {spec.radius_band[1]:g}"
        )
    lo, hi = spec.region_span
    half = spec.region_halfwidth
    w = field.window
    if not (w.lower[0] <= lo and hi <= w.upper[0]
            and np.all(w.lower[1:] <= -half) and np.all(w.upper[1:] >= half)):
        raise TiltError("field window does not contain the tilt block")
    sel = spec.in_region_band(field.centers, field.radii)
    r = field.radii[sel]
    alpha = spec.params.alpha
    log_prod = np.sum(np.log1p(r ** (1.0 + alpha) * spec.intensity / alpha))
    return float(math.exp(log_prod - spec.lambda_hat))


def inverse_rn_mean_exact(spec: TiltSpec) -> float:
    """Closed form for the base-law mean of 1/rn_derivative.

    Campbell's formula for a product over Poisson points gives
    exp(lambda_hat - |block| * int_band L^-kappa / (1 + g(r)) dr) with
    g(r) = r^(1+alpha) L^-kappa / alpha.  Bounded in L exactly when the
    tilt is admissible.
    """
    alpha = spec.params.alpha
    inten = spec.intensity

    def integrand(r):
        return inten / (1.0 + r ** (1.0 + alpha) * inten / alpha)

    lo, hi = spec.radius_band
    val, err = integrate.quad(integrand, lo, hi, limit=200)
    if err > 1e-10 * max(1.0, abs(val)):
        raise TiltError("quadrature for the inverse-density mean did not converge")
    vol = spec.region_volume
    return math.exp(spec.lambda_hat - vol * val)


@dataclass(frozen=True)
class SlabCoverage:
    covered: bool
    anchor: float
    margin: float


def slab_coverage_check(spec: TiltSpec, trap: Trap) -> SlabCoverage:
    """Anchor a tube slab under the trap and verify the ball covers it.

    The slab [a, a + L^xi] x [-L^xi/2, L^xi/2]^(d-1) is anchored at the
    trap center's first coordinate (clamped into the block span) and must
    be contained in the trap ball; the margin is radius minus the farthest
    corner distance.
    """
    d = spec.params.d
    width = spec.L ** spec.xi
    lo, hi = spec.region_span
    a = min(max(trap.center[0] - width / 2.0, lo), hi - width)
    half = spec.region_halfwidth
    c = np.asarray(trap.center, dtype=float)
    far_sq = max((a - c[0]) ** 2, (a + width - c[0]) ** 2)
    for j in range(1, d):
        far_sq += max((half - c[j]) ** 2, (half + c[j]) ** 2)
    far = math.sqrt(far_sq)
    return SlabCoverage(far <= trap.radius + 1e-12, float(a),
                        float(trap.radius - far))


@dataclass(frozen=True)
class PairedTiltResult:
    """Coupled comparison of the tube partition function with and without
    the added traps, estimated on the same trajectories."""

    log_diff: float
    log_diff_stderr: float
    base: Estimate
    tilted: Estimate
    pathwise_violations: int
    avoidance_weight_equal: bool
    n_added: int


def paired_tilt_comparison(field: TrapField, spec: TiltSpec, config: PathConfig,
                           n: int, seed: int = 0, *,
                           tilt_centers: np.ndarray | None = None,
                           tilt_radii: np.ndarray | None = None,
                           tilt_seed: int = 1, threads: int = 1,
                           n_boot: int = 200) -> PairedTiltResult:
    """Estimate log Z(A) - log Z~(A) for one added trap layer, path by path.

    The same trajectories (identical seeds; the sampling dynamics do not
    depend on the field) are weighed in the base and in the augmented
    environment, so each path contributes its base weight and that weight
    times exp(-integral of the added potential).  Returns the difference
    of log estimates with a path-bootstrap standard error, the count of
    pathwise sign violations (must be zero: the added potential is
    nonnegative), and whether weights agree exactly on the avoidance
    event (they must: the added balls lie inside the enlarged block).
    """
    if tilt_centers is None:
        tilt_centers, tilt_radii = sample_tilt(spec, tilt_seed)
    tilt_centers = np.atleast_2d(np.asarray(tilt_centers, dtype=float))
    if tilt_centers.shape[0] == 0:
        tilt_centers = tilt_centers.reshape(0, spec.params.d)
    tilt_radii = np.atleast_1d(np.asarray(tilt_radii, dtype=float))
    n_added = tilt_centers.shape[0]

    base_batch = run_paths(field, config, n, seed, threads)
    if n_added:
        tilted_field = field.with_traps_added(tilt_centers, tilt_radii)
        tilted_batch = run_paths(tilted_field, config, n, seed, threads)
    else:
        tilted_batch = base_batch

    # identical trajectories: the sampling law does not depend on the field
    if not np.array_equal(base_batch.T, tilted_batch.T):
        raise TiltError("path coupling broke: trajectories differ across fields")

    ind = base_batch.indicator("A")
    lw_base = base_batch.log_w
    lw_tilt = tilted_batch.log_w
    viol = int(np.sum(ind & (lw_tilt > lw_base + 1e-12)))

    # avoidance event: weights must agree exactly where the path stays clear
    ind_b = base_batch.indicator("B")
    b_equal = bool(np.all(lw_base[ind_b] == lw_tilt[ind_b]))

    def log_z(lw, mask):
        if not mask.any():
            return -math.inf
        m = lw[mask].max()
        return m + math.log(np.exp(lw[mask] - m).sum()) - math.log(n)

    log_diff = log_z(lw_base, ind) - log_z(lw_tilt, ind)

    rng = split_seed(seed, 2 ** 40)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        pick = rng.integers(0, n, n)
        mask = ind[pick]
        lb = lw_base[pick]
        lt = lw_tilt[pick]
        boots[b] = log_z(lb, mask) - log_z(lt, mask)
    stderr = float(np.std(boots, ddof=1))

    from .sampler import estimate_from_batch
    return PairedTiltResult(
        log_diff=float(log_diff),
        log_diff_stderr=stderr,
        base=estimate_from_batch(base_batch, "A"),
        tilted=estimate_from_batch(tilted_batch, "A"),
        pathwise_violations=viol,
        avoidance_weight_equal=b_equal,
        n_added=n_added,
    )


def predicted_gain_exponent(spec: TiltSpec) -> float:
    """Exponent of the expected log-weight shift from the added layer."""
    d, alpha, gamma = spec.params.d, spec.params.alpha, spec.params.gamma
    return ((d + 1 - alpha - 2 * gamma) * spec.xi + 1) / 2.0
