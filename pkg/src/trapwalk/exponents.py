"""Closed-form exponents, feasibility conditions, and potential covariance.

The calculator layer: no sampling here except :func:`mc_covariance`, which
exists to validate the analytic covariance against fields drawn by the
simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .field import ModelParams, Window, potential, sample_field, unit_ball_volume
from .rng import substream
from .sampler import Estimate


class TheoryError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentInput:
    d: int
    alpha: float
    gamma: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise TheoryError("d must be an integer >= 1")
        if not (self.alpha > 0 and self.gamma > 0):
            raise TheoryError("alpha and gamma must be positive")
        # the boundary alpha + gamma = d is allowed here: the exponent
        # formulas extend there, only simulation (ModelParams) needs > 0
        if self.alpha + self.gamma - self.d < 0:
            raise TheoryError("need alpha + gamma - d >= 0")


def bar_xi(inp: ExponentInput) -> float:
    """Superdiffusivity lower-bound exponent, piecewise in gamma.

    1/(alpha - d + 1) when gamma <= alpha - d, else
    3/(3 + alpha + 2 gamma - d); the branches agree at gamma = alpha - d.
    """
    d, a, g = inp.d, inp.alpha, inp.gamma
    if g <= a - d:
        return 1.0 / (a - d + 1.0)
    return 3.0 / (3.0 + a + 2.0 * g - d)


def lower_bound_exponent(inp: ExponentInput) -> float:
    """Lower bound for the volume exponent: bar_xi floored at diffusive 1/2."""
    return max(bar_xi(inp), 0.5)


def feasibility(inp: ExponentInput, xi: float) -> tuple[bool, bool]:
    """The two strict inequalities a usable tube exponent must satisfy.

    First: the tilt gain ((d+1-alpha-2 gamma) xi + 1)/2 beats the
    rotation cost exponent 2 xi - 1.  Second: (d-1-alpha) xi + 1 > 0, the
    admissibility of the tilt intensity.
    """
    if not 0 < xi < 1:
        raise TheoryError("xi must lie in (0, 1)")
    d, a, g = inp.d, inp.alpha, inp.gamma
    gain = ((d + 1 - a - 2 * g) * xi + 1) / 2.0
    return gain > 2 * xi - 1, (d - 1 - a) * xi + 1 > 0


def sup_feasible_xi(inp: ExponentInput, tol: float = 1e-12) -> float:
    """Supremum of the xi in (0,1) satisfying both feasibility conditions.

    Bisection on the monotone feasible set; equals
    min(3/(3+alpha+2 gamma-d), 1/(alpha+1-d) if alpha+1-d>0 else 1, 1).
    """
    def ok(xi: float) -> bool:
        a, b = feasibility(inp, xi)
        return a and b

    lo, hi = 0.0, 1.0
    if ok(0.5):
        lo = 0.5
    else:
        hi = 0.5
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if 0 < mid < 1 and ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def p2p_bound(inp: ExponentInput) -> float:
    """Tube exponent below which the point-to-point tube event vanishes.

    1/(1 + alpha + 2 gamma - d), capped at one; solves
    ((d+1-alpha-2 gamma) xi + 1)/2 = xi.
    """
    denom = 1.0 + inp.alpha + 2.0 * inp.gamma - inp.d
    if denom <= 0:
        raise TheoryError("nonpositive denominator in the point-to-point bound")
    return min(1.0 / denom, 1.0)


# -- potential covariance ----------------------------------------------------


def ball_overlap(d: int, s: float, r: float) -> float:
    """Volume of the intersection of two radius-r balls at center distance s.

    General d via the regularized incomplete beta function; d <= 3 have
    elementary forms used as cross-checks in the tests.
    """
    if s >= 2.0 * r:
        return 0.0
    if s <= 0.0:
        return unit_ball_volume(d) * r ** d
    x = 1.0 - (s / (2.0 * r)) ** 2
    return unit_ball_volume(d) * r ** d * float(special.betainc((d + 1) / 2.0, 0.5, x))


def ball_overlap_closed(d: int, s: float, r: float) -> float:
    """Elementary overlap formulas for d in {1, 2, 3}."""
    if s >= 2.0 * r:
        return 0.0
    s = max(s, 0.0)
    if d == 1:
        return 2.0 * r - s
    if d == 2:
        return 2.0 * r * r * math.acos(s / (2.0 * r)) - 0.5 * s * math.sqrt(
            4.0 * r * r - s * s)
    if d == 3:
        return math.pi * (2.0 * r - s) ** 2 * (4.0 * r + s) / 12.0
    raise TheoryError("closed forms exist only for d <= 3")


def analytic_covariance(params: ModelParams, s: float) -> float:
    """Covariance of the potential at two points distance s apart.

    Campbell's formula: integral over the radius law of r^(-2 gamma) times
    the two-ball overlap volume, i.e.
    int_1^r_max alpha r^(-alpha-1-2 gamma) overlap_d(s, r) dr.
    """
    if s < 0:
        raise TheoryError("distance must be nonnegative")
    a, g, d = params.alpha, params.gamma, params.d
    upper = params.r_max
    if s >= 2.0 * upper:
        return 0.0
    lower = max(1.0, s / 2.0)

    def integrand(r):
        return a * r ** (-a - 1.0 - 2.0 * g) * ball_overlap(d, s, r)

    val, err = integrate.quad(integrand, lower, upper, limit=400,
                              epsabs=0.0, epsrel=1e-9)
    if not np.isfinite(val) or err > max(1e-13, 1e-6 * abs(val)):
        raise TheoryError(f"covariance quadrature did not converge ({val}, {err})")
    return float(val)


def potential_variance(params: ModelParams) -> float:
    """Closed form for the variance of V at a point (s = 0)."""
    a, g, d = params.alpha, params.gamma, params.d
    expo = d - a - 2.0 * g
    sigma = unit_ball_volume(d)
    if np.isinf(params.r_max):
        tail = 0.0
    else:
        tail = params.r_max ** expo
    return a * sigma * (1.0 - tail) / (-expo)


def covariance_slope(params: ModelParams, s_grid) -> float:
    """Least-squares slope of log covariance against log distance."""
    s = np.asarray(list(s_grid), dtype=float)
    c = np.array([analytic_covariance(params, v) for v in s])
    if np.any(c <= 0):
        raise TheoryError("covariance vanished on the grid; shrink distances")
    x = np.log(s)
    y = np.log(c)
    x = x - x.mean()
    return float(np.sum(x * (y - y.mean())) / np.sum(x * x))


def mc_covariance(params: ModelParams, s: float, n_fields: int,
                  master_seed: int = 0, *, probe_axis: int = 0,
                  pad: float = 2.0) -> Estimate:
    """Sample covariance of (V(0), V(s e_axis)) over independent fields.

    The window only needs to contain the probe points: dilated candidate
    sampling already accounts for every trap whose ball can reach them.
    """
    d = params.d
    probe = np.zeros(d)
    probe[probe_axis] = s
    lo = np.minimum(np.zeros(d), probe) - pad
    hi = np.maximum(np.zeros(d), probe) + pad
    window = Window(lo, hi)
    v0 = np.empty(n_fields)
    vs = np.empty(n_fields)
    for i in range(n_fields):
        seed = int(substream(master_seed, 7, i).integers(2 ** 62))
        fld = sample_field(params, window, seed)
        v0[i] = potential(fld, np.zeros(d))
        vs[i] = potential(fld, probe)
    prod = (v0 - v0.mean()) * (vs - vs.mean())
    n = n_fields
    cov = float(prod.sum() / (n - 1))
    stderr = float(prod.std(ddof=1) / math.sqrt(n))
    ess = float(n)
    return Estimate(cov, stderr, n, ess)
