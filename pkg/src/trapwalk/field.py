"""Marked Poisson trap fields and their potential.

A trap is a euclidean ball B(c, r) with r >= 1 contributing r^-gamma to the
potential everywhere inside it.  Centers form a unit-rate Poisson process,
radii are independent Pareto(alpha) draws, and the whole construction is
restricted to a finite window: each dyadic radius class is sampled on the
window dilated by its upper radius and candidates are kept iff their ball
actually meets the window.  The omitted tail of radii above ``r_max`` has an
exactly computable mean contribution, see :func:`truncation_bias`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _engine

_VALIDATE_TOL = 1e-9


class FieldError(ValueError):
    """Invalid model parameters, geometry, or serialized field data."""


def unit_ball_volume(d: int) -> float:
    """Volume of the unit euclidean ball in d dimensions."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class ModelParams:
    """Model constants: dimension, radius tail, trap strength, killing rate.

    The potential is almost surely finite iff alpha + gamma - d > 0, so the
    constructor rejects anything else.  ``r_max`` truncates the radius law
    (supported on [1, inf)) for simulation.
    """

    d: int
    alpha: float
    gamma: float
    lam: float
    r_max: float = 64.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise FieldError(f"dimension must be an integer >= 1, got {self.d}")
        if not self.alpha > 0:
            raise FieldError("alpha must be positive")
        if not self.gamma > 0:
            raise FieldError("gamma must be positive")
        if not self.lam > 0:
            raise FieldError("lam must be positive")
        if not self.r_max >= 1:
            raise FieldError("r_max must be >= 1 (radius law lives on [1, inf))")
        if not self.alpha + self.gamma - self.d > 0:
            raise FieldError(
                f"need alpha + gamma - d > 0 for a finite potential, "
                f"got {self.alpha + self.gamma - self.d:g}"
            )


@dataclass(frozen=True)
class Trap:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius >= 1:
            raise FieldError("trap radius must be >= 1")


class Window:
    """Axis-aligned box, the finite simulation region."""

    def __init__(self, lower, upper):
        lo = np.atleast_1d(np.asarray(lower, dtype=np.float64)).copy()
        hi = np.atleast_1d(np.asarray(upper, dtype=np.float64)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise FieldError("window corners must be 1-d arrays of equal length")
        if np.any(lo > hi):
            raise FieldError("window needs lower <= upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lower = lo
        self.upper = hi

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def dist_to(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from each point to the box (0 inside)."""
        pts = np.atleast_2d(points)
        gap = np.maximum(self.lower - pts, pts - self.upper)
        return np.linalg.norm(np.maximum(gap, 0.0), axis=1)

    def contains_box(self, lower, upper) -> bool:
        return bool(np.all(self.lower <= lower) and np.all(upper <= self.upper))

    def __repr__(self):
        return f"Window({self.lower.tolist()}, {self.upper.tolist()})"

    def __eq__(self, other):
        return (
            isinstance(other, Window)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )


def radius_classes(r_max: float) -> list[tuple[float, float]]:
    """Dyadic partition [1,2), [2,4), ... of [1, r_max]."""
    classes = []
    a = 1.0
    while a < r_max:
        b = min(2.0 * a, r_max)
        classes.append((a, b))
        a = b
    return classes


class TrapField:
    """Immutable realization of the trap process in a window.

    Traps are stored canonically sorted (radius, then center coordinates)
    and indexed by dyadic radius layers: layer k holds radii in
    [2^k, 2^(k+1)) on a uniform grid of cell size 2^(k+1), so a point query
    touches at most 3^d cells per layer.
    """

    def __init__(self, params: ModelParams, window: Window, centers, radii,
                 seed: int, validate: bool = True):
        if window.d != params.d:
            raise FieldError("window dimension does not match params.d")
        centers = np.ascontiguousarray(np.asarray(centers, dtype=np.float64))
        radii = np.ascontiguousarray(np.asarray(radii, dtype=np.float64))
        if centers.size == 0:
            centers = centers.reshape(0, params.d)
        if centers.ndim != 2 or centers.shape[1] != params.d:
            raise FieldError("centers must have shape (n, d)")
        if radii.shape != (centers.shape[0],):
            raise FieldError("radii must have shape (n,)")
        if validate and centers.shape[0]:
            if np.any(radii < 1 - _VALIDATE_TOL):
                raise FieldError("all trap radii must be >= 1")
            if np.any(window.dist_to(centers) > radii + _VALIDATE_TOL):
                raise FieldError("every trap ball must intersect the window")

        # canonical order: radius first, then coordinates
        if centers.shape[0]:
            keys = tuple(centers[:, j] for j in range(params.d - 1, -1, -1))
            order = np.lexsort(keys + (radii,))
            centers = np.ascontiguousarray(centers[order])
            radii = np.ascontiguousarray(radii[order])

        self.params = params
        self.window = window
        self.seed = int(seed)
        self.centers = centers
        self.radii = radii
        self.radii_sq = radii * radii
        self.strengths = radii ** (-params.gamma)
        for a in (self.centers, self.radii, self.radii_sq, self.strengths):
            a.setflags(write=False)
        self._build_index()

    # -- spatial index ---------------------------------------------------

    def _build_index(self):
        d = self.params.d
        n = self.centers.shape[0]
        if n:
            exps = np.floor(np.log2(self.radii)).astype(np.int64)
            exps = np.maximum(exps, 0)
            levels = np.unique(exps)
        else:
            levels = np.empty(0, np.int64)
        nl = levels.shape[0]
        self._layer_cell_size = np.empty(nl, np.float64)
        self._layer_origin = np.empty((nl, d), np.float64)
        self._layer_dims = np.empty((nl, d), np.int64)
        self._layer_cell_offset = np.empty(nl + 1, np.int64)
        starts = []
        items = []
        self._layer_cell_offset[0] = 0
        for k, e in enumerate(levels):
            cell = float(2.0 ** (e + 1))
            origin = self.window.lower - cell
            extent = (self.window.upper + cell) - origin
            dims = np.floor(extent / cell).astype(np.int64) + 2
            sel = np.nonzero(exps == e)[0]
            coords = np.floor((self.centers[sel] - origin) / cell).astype(np.int64)
            if np.any(coords < 0) or np.any(coords >= dims):
                raise FieldError("trap center outside its layer grid")
            flat = coords[:, 0]
            for j in range(1, d):
                flat = flat * dims[j] + coords[:, j]
            order = np.argsort(flat, kind="stable")
            ncells = int(np.prod(dims))
            start = np.zeros(ncells + 1, np.int64)
            np.add.at(start, flat + 1, 1)
            np.cumsum(start, out=start)
            self._layer_cell_size[k] = cell
            self._layer_origin[k] = origin
            self._layer_dims[k] = dims
            self._layer_cell_offset[k + 1] = self._layer_cell_offset[k] + ncells + 1
            starts.append(start)
            items.append(sel[order].astype(np.int64))
        # make cell_start global: shift each layer's boundaries by the number
        # of items in earlier layers
        shift = 0
        for k in range(nl):
            starts[k] = starts[k] + shift
            shift += items[k].shape[0]
        self._cell_start = (
            np.concatenate(starts) if nl else np.zeros(1, np.int64)
        )
        self._cell_items = (
            np.concatenate(items) if nl else np.empty(0, np.int64)
        )
        for a in (self._layer_cell_size, self._layer_origin, self._layer_dims,
                  self._layer_cell_offset, self._cell_start, self._cell_items):
            a.setflags(write=False)

    def index_arrays(self):
        """Raw arrays consumed by the jitted kernels."""
        return (
            self.centers, self.radii_sq, self.strengths,
            self._layer_cell_size, self._layer_origin, self._layer_dims,
            self._layer_cell_offset, self._cell_start, self._cell_items,
        )

    # -- accessors ---------------------------------------------------------

    @property
    def n_traps(self) -> int:
        return self.centers.shape[0]

    @property
    def traps(self) -> tuple[Trap, ...]:
        return tuple(
            Trap(tuple(self.centers[i]), float(self.radii[i]))
            for i in range(self.n_traps)
        )

    def with_traps_added(self, centers, radii) -> "TrapField":
        """New field with extra traps appended (base field is untouched)."""
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        radii = np.atleast_1d(np.asarray(radii, dtype=np.float64))
        if centers.shape[0] == 0:
            return self
        return TrapField(
            self.params, self.window,
            np.vstack([self.centers, centers]),
            np.concatenate([self.radii, radii]),
            self.seed,
        )

    @classmethod
    def empty(cls, params: ModelParams, window: Window, seed: int = 0) -> "TrapField":
        return cls(params, window, np.empty((0, params.d)), np.empty(0), seed)


def class_candidate_mean(params: ModelParams, window: Window,
                         rclass: tuple[float, float]) -> float:
    """Poisson mean of candidate centers for one radius class.

    Candidates live on the window dilated by the class upper radius, at
    rate nu([a,b)) per unit volume.
    """
    a, b = rclass
    mass = a ** (-params.alpha) - b ** (-params.alpha)
    dil = np.prod((window.upper + b) - (window.lower - b))
    return float(mass * dil)


def sample_field(params: ModelParams, window: Window, seed: int) -> TrapField:
    """Draw one realization of the trap process restricted to the window.

    Per dyadic radius class, candidate centers are a homogeneous Poisson
    process on the dilated window, radii are inverse-CDF draws from the
    Pareto law restricted to the class, and a candidate is kept iff its
    ball meets the window.  Deterministic given the seed.
    """
    if window.d != params.d:
        raise FieldError("window dimension does not match params.d")
    if not np.all(np.isfinite(window.lower)) or not np.all(np.isfinite(window.upper)):
        raise FieldError("window must be bounded")
    dil_vol = np.prod((window.upper - window.lower) + 2 * params.r_max)
    if not np.isfinite(dil_vol):
        raise FieldError("dilated window volume overflows")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed)))
    if window.volume == 0.0:
        return TrapField.empty(params, window, seed)

    alpha = params.alpha
    all_centers = []
    all_radii = []
    for a, b in radius_classes(params.r_max):
        mass = a ** (-alpha) - b ** (-alpha)
        lo = window.lower - b
        hi = window.upper + b
        n = rng.poisson(mass * np.prod(hi - lo))
        centers = rng.uniform(lo, hi, size=(n, params.d))
        u = rng.random(n)
        radii = (a ** (-alpha) - u * mass) ** (-1.0 / alpha)
        keep = window.dist_to(centers) <= radii
        all_centers.append(centers[keep])
        all_radii.append(radii[keep])
    if all_centers:
        centers = np.vstack(all_centers)
        radii = np.concatenate(all_radii)
    else:
        centers = np.empty((0, params.d))
        radii = np.empty(0)
    return TrapField(params, window, centers, radii, seed, validate=False)


def potential(field: TrapField, x) -> float:
    """Potential V(x): sum of r^-gamma over traps covering x."""
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if x.shape != (field.params.d,):
        raise FieldError(f"point must have shape ({field.params.d},)")
    hits = np.empty(field.n_traps + 1, np.int64)
    base = np.empty(field.params.d, np.int64)
    return float(_engine.potential_at(x, *field.index_arrays(), hits, base))


def potential_many(field: TrapField, xs) -> np.ndarray:
    """Vectorized potential over points of shape (m, d)."""
    xs = np.ascontiguousarray(np.atleast_2d(np.asarray(xs, dtype=np.float64)))
    if xs.shape[1] != field.params.d:
        raise FieldError("points must have shape (m, d)")
    out = np.empty(xs.shape[0])
    _engine.potential_batch(xs, out, *field.index_arrays())
    return out


def truncation_bias(params: ModelParams) -> float:
    """Mean potential contribution of the omitted radii above r_max.

    Exact tail integral: alpha * sigma_d * r_max^(d-alpha-gamma) / (alpha
    + gamma - d), valid at every point by translation invariance.
    """
    sigma = unit_ball_volume(params.d)
    expo = params.d - params.alpha - params.gamma
    if np.isinf(params.r_max):
        return 0.0
    return params.alpha * sigma * params.r_max ** expo / (-expo)


def rotate_field(field: TrapField, theta: float) -> TrapField:
    """Rotate trap centers in the first two coordinates.

    Radii are unchanged; the window becomes the bounding box of the rotated
    window and the spatial index is rebuilt.
    """
    if field.params.d < 2:
        raise FieldError("rotation needs d >= 2")
    c, s = math.cos(theta), math.sin(theta)
    centers = field.centers.copy()
    x0 = field.centers[:, 0]
    x1 = field.centers[:, 1]
    centers[:, 0] = x0 * c - x1 * s
    centers[:, 1] = x1 * c + x0 * s

    lo = field.window.lower.copy()
    hi = field.window.upper.copy()
    corners = [
        (lo[0], lo[1]), (lo[0], hi[1]), (hi[0], lo[1]), (hi[0], hi[1]),
    ]
    rot = [(cx * c - cy * s, cy * c + cx * s) for cx, cy in corners]
    lo[0] = min(p[0] for p in rot)
    hi[0] = max(p[0] for p in rot)
    lo[1] = min(p[1] for p in rot)
    hi[1] = max(p[1] for p in rot)
    return TrapField(field.params, Window(lo, hi), centers, field.radii,
                     field.seed, validate=False)


def max_potential_scan(field: TrapField, box: Window, resolution: float,
                       point_budget: int = 2_000_000) -> float:
    """Maximum of V over a regular grid in the box.

    A lower bound on the true supremum; finer resolution tightens it.
    """
    if resolution <= 0:
        raise FieldError("resolution must be positive")
    if not field.window.contains_box(box.lower, box.upper):
        raise FieldError("scan box must lie inside the field window")
    axes = [
        np.arange(box.lower[j], box.upper[j] + resolution / 2, resolution)
        for j in range(field.params.d)
    ]
    npts = int(np.prod([len(ax) for ax in axes]))
    if npts > point_budget:
        raise FieldError(f"grid of {npts} points exceeds budget {point_budget}")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return float(potential_many(field, pts).max(initial=0.0))


def campbell_exp_moment(params: ModelParams, a: float) -> float:
    """Exponential moment of the trap-strength sum over B(0, sqrt(d)).

    Evaluates exp( int_1^inf alpha r^(-alpha-1) sigma_d (r+sqrt(d))^d
    (e^(a r^-gamma) - 1) dr ) by adaptive quadrature.  The integrand uses
    the radius-law density together with the dilated-ball volume.
    """
    sigma = unit_ball_volume(params.d)
    sqd = math.sqrt(params.d)
    al, ga, d = params.alpha, params.gamma, params.d

    def integrand(r):
        return al * r ** (-al - 1) * sigma * (r + sqd) ** d * math.expm1(a * r ** -ga)

    val, err = integrate.quad(integrand, 1.0, np.inf, limit=400)
    if not np.isfinite(val) or err > max(1e-8, 1e-6 * abs(val)):
        raise FieldError(f"quadrature did not converge (value {val}, error {err})")
    return math.exp(val)


# -- serialization ---------------------------------------------------------

def save_field(field: TrapField, path) -> None:
    """Write a field as a headered flat text file.

    Header: d alpha gamma lambda r_max seed, then the window corners.  One
    line per trap: center coordinates and radius, fixed 12-decimal format.
    """
    p = field.params
    with open(path, "w") as fh:
        head = [str(p.d), repr(float(p.alpha)), repr(float(p.gamma)),
                repr(float(p.lam)), repr(float(p.r_max)), str(field.seed)]
        head += [repr(float(v)) for v in field.window.lower]
        head += [repr(float(v)) for v in field.window.upper]
        fh.write(" ".join(head) + "\n")
        for i in range(field.n_traps):
            row = [f"{v:.12f}" for v in field.centers[i]]
            row.append(f"{field.radii[i]:.12f}")
            fh.write(" ".join(row) + "\n")


def load_field(path) -> TrapField:
    """Read a field written by :func:`save_field`, validating invariants."""
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) < 6:
            raise FieldError("malformed field header")
        d = int(head[0])
        if len(head) != 6 + 2 * d:
            raise FieldError("field header does not match its dimension")
        params = ModelParams(d=d, alpha=float(head[1]), gamma=float(head[2]),
                             lam=float(head[3]), r_max=float(head[4]))
        seed = int(head[5])
        lo = [float(v) for v in head[6:6 + d]]
        hi = [float(v) for v in head[6 + d:6 + 2 * d]]
        window = Window(lo, hi)
        rows = [line.split() for line in fh if line.strip()]
    centers = np.array([[float(v) for v in r[:d]] for r in rows], dtype=np.float64)
    radii = np.array([float(r[d]) for r in rows], dtype=np.float64)
    if rows and any(len(r) != d + 1 for r in rows):
        raise FieldError("malformed trap record")
    return TrapField(params, window, centers, radii, seed, validate=True)
