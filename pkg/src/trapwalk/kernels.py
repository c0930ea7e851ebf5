"""Closed-form reference laws used as oracles by the sampler tests.

Dirichlet heat kernels on intervals and boxes via eigenfunction series,
one-dimensional level hitting laws, and the slab-exit tail in both its
asymptotic and reflection-series forms.  Everything is a pure function of
its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

DEFAULT_TERMS = 64


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelQuery:
    """Evaluation point for the box kernel: positions, time, series length."""

    x: tuple[float, ...]
    y: tuple[float, ...]
    t: float
    terms: int = DEFAULT_TERMS

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise KernelError("x and y must have the same dimension")
        if not self.t > 0:
            raise KernelError("t must be positive")
        if self.terms < 1:
            raise KernelError("terms must be >= 1")


def dirichlet_kernel_unit(x: float, y: float, t: float,
                          terms: int = DEFAULT_TERMS) -> float:
    """Transition density on (0,1) killed at the boundary.

    Eigenfunction series sum_k 2 sin(k pi x) sin(k pi y) exp(-(k pi)^2 t/2),
    truncated after ``terms`` terms; the generator is Delta/2 (standard
    Brownian motion).  See :func:`series_tail_bound` for the truncation
    error.
    """
    if not 0 <= x <= 1 or not 0 <= y <= 1:
        raise KernelError("x and y must lie in [0, 1]")
    if not t > 0:
        raise KernelError("t must be positive")
    if x in (0.0, 1.0) or y in (0.0, 1.0):
        return 0.0
    k = np.arange(1, terms + 1)
    return float(np.sum(
        2.0 * np.sin(k * np.pi * x) * np.sin(k * np.pi * y)
        * np.exp(-(k * np.pi) ** 2 * t / 2.0)
    ))


def series_tail_bound(t: float, terms: int) -> float:
    """Bound on the dropped series tail: 2 sum_{k>terms} exp(-(k pi)^2 t/2).

    Terms decay faster than a geometric sequence with ratio
    exp(-(2*terms+3) pi^2 t / 2).
    """
    if not t > 0:
        raise KernelError("t must be positive")
    a = np.pi ** 2 * t / 2.0
    lead = 2.0 * np.exp(-((terms + 1) ** 2) * a)
    ratio = np.exp(-(2 * terms + 3) * a)
    return float(lead / (1.0 - ratio))


def dirichlet_kernel_box(q: KernelQuery, width: float, dims: int) -> float:
    """Killed transition density on the box (-width/2, width/2)^dims.

    Product over coordinates of the diffusively rescaled unit-interval
    kernel: p_t(x, y) = prod_i (1/w) p0_{t/w^2}(x_i/w + 1/2, y_i/w + 1/2).
    """
    if dims < 1:
        raise KernelError("dims must be >= 1")
    if len(q.x) != dims:
        raise KernelError(f"query has dimension {len(q.x)}, expected {dims}")
    if not width > 0:
        raise KernelError("width must be positive")
    half = width / 2.0
    out = 1.0
    for xi, yi in zip(q.x, q.y):
        if not -half <= xi <= half or not -half <= yi <= half:
            raise KernelError("coordinates must lie in [-width/2, width/2]")
        out *= dirichlet_kernel_unit(
            xi / width + 0.5, yi / width + 0.5, q.t / width ** 2, q.terms
        ) / width
    return out


def boundary_gap(x, width: float) -> float:
    """A(x): product over coordinates of the distance to the box boundary."""
    half = width / 2.0
    out = 1.0
    for xi in np.atleast_1d(np.asarray(x, dtype=float)):
        out *= min(xi + half, half - xi)
    return float(out)


@dataclass(frozen=True)
class BoundsReport:
    value: float
    upper_bound: float
    upper_ok: bool
    upper_margin: float
    lower_bound: float | None
    lower_ok: bool | None
    lower_margin: float | None


def kernel_bounds_check(q: KernelQuery, width: float,
                        lower_t_threshold: float = 2.0) -> BoundsReport:
    """Check the kernel against its envelope bounds at one query.

    Upper: p_t(x,y) <= A(x)A(y)/t^2.  Lower: p_t(x,y) >= A(x)A(y)
    exp(-w^2/t - t pi^2/2), asserted only for t >= ``lower_t_threshold``
    (it is a large-time bound).
    """
    dims = len(q.x)
    val = dirichlet_kernel_box(q, width, dims)
    gap = boundary_gap(q.x, width) * boundary_gap(q.y, width)
    upper = gap / q.t ** 2
    lower = gap * np.exp(-width ** 2 / q.t - q.t * np.pi ** 2 / 2.0)
    tol = 1e-12 * max(1.0, abs(upper))
    upper_ok = val <= upper + tol
    if q.t >= lower_t_threshold:
        lower_ok = val >= lower - 1e-12 * max(1.0, abs(lower))
        return BoundsReport(val, upper, upper_ok, upper - val,
                            float(lower), lower_ok, val - float(lower))
    return BoundsReport(val, upper, upper_ok, upper - val, None, None, None)


def hitting_time_cdf(r: float, s: float) -> float:
    """P(one-dimensional BM hits level r by time s) = erfc(r / sqrt(2 s))."""
    if not r > 0 or not s > 0:
        raise KernelError("r and s must be positive")
    return float(special.erfc(r / np.sqrt(2.0 * s)))


def two_sided_max_tail(a: float, terms: int = 64) -> float:
    """P(max_{s<=1} |B_s| >= a) by the reflection series."""
    if a <= 0:
        return 1.0
    k = np.arange(-terms, terms + 1)
    cdf_in = special.ndtr((2 * k + 1) * a) - special.ndtr((2 * k - 1) * a)
    stay = np.sum((-1.0) ** np.abs(k) * cdf_in)
    return float(1.0 - stay)


@dataclass(frozen=True)
class SlabExitTail:
    asymptotic: float
    exact: float


def slab_exit_tail(halfwidth: float, t: float) -> SlabExitTail:
    """Probability that BM started at a slab center leaves it by time t.

    The slab has the given halfwidth; the asymptotic form is
    (8 sqrt(t) / (w sqrt(2 pi))) exp(-w^2/(8t)) with w twice the halfwidth,
    valid when halfwidth/sqrt(t) is large.  The companion exact value is
    the reflection series for the two-sided running maximum.
    """
    if not halfwidth > 0:
        raise KernelError("halfwidth must be positive")
    if not t > 0:
        return SlabExitTail(0.0, 0.0)
    w = 2.0 * halfwidth
    asym = 8.0 * np.sqrt(t) / (w * np.sqrt(2.0 * np.pi)) * np.exp(-w * w / (8.0 * t))
    exact = two_sided_max_tail(halfwidth / np.sqrt(t))
    return SlabExitTail(float(asym), float(exact))
