"""Killed-Brownian path sampling and weighted Monte Carlo estimators.

Trajectories are Euler-Maruyama walks with an importance drift on the first
coordinate, weighted by the killing factor exp(-int (V + lam) dt) and the
exact likelihood correction for the drift, so that
``girsanov * fk_weight * 1{event}`` is an estimator of the restricted
partition function.  Observables under the survival-weighted path measure
use self-normalized weights.

Path-measure events:
  A    -- the trajectory stays in the tube R x [-L^xi/2, L^xi/2]^(d-1)
  B    -- the trajectory never comes within 2 sqrt(d) L^xi of the block
          [L/2, L] x [-L^xi/2, L^xi/2]^(d-1)  (or [L/4, 3L/4] x ... for
          ball targets)
Both are evaluated at step resolution (sampled points only), which is a
documented caveat of every event-restricted estimate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _engine
from .field import ModelParams, TrapField, Window, rotate_field, sample_field
from .rng import split_seed, substream

CHUNK_START = 512
CHUNK_MAX = 16384
LOW_ESS = 30

HYPERPLANE = "hyperplane"
BALL = "ball"

EVENTS = ("ALL", "A", "B", "A_theta")


class SamplerError(ValueError):
    pass


class BudgetError(SamplerError):
    """The step budget cannot guarantee the configured miss tolerance."""


@dataclass(frozen=True)
class PathConfig:
    """Geometry and discretization of one sampling problem.

    ``drift=None`` resolves to sqrt(2 lam), the ballistic speed of the
    survival-conditioned free motion.  ``max_steps=None`` resolves to a
    budget that passes :func:`validate_budget`.
    """

    L: float
    xi: float = 0.5
    dt: float = 1e-2
    drift: float | None = None
    max_steps: int | None = None
    target: str = HYPERPLANE
    slabs: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.L < 0:
            raise SamplerError("L must be >= 0")
        if not 0 < self.xi < 1:
            raise SamplerError("xi must lie in (0, 1)")
        if not self.dt > 0:
            raise SamplerError("dt must be positive")
        if self.drift is not None and self.drift < 0:
            raise SamplerError("drift must be >= 0")
        if self.max_steps is not None and self.max_steps < 1:
            raise SamplerError("max_steps must be >= 1")
        if self.target not in (HYPERPLANE, BALL):
            raise SamplerError(f"unknown target {self.target!r}")
        for lo, hi in self.slabs:
            if not lo < hi:
                raise SamplerError("slab bounds must satisfy lo < hi")

    # derived geometry ----------------------------------------------------

    @property
    def tube_halfwidth(self) -> float:
        return self.L ** self.xi / 2.0

    def block_span(self) -> tuple[float, float]:
        """First-coordinate extent of the block that event B must avoid."""
        if self.target == BALL:
            return self.L / 4.0, 3.0 * self.L / 4.0
        return self.L / 2.0, self.L

    def block_pad(self, d: int) -> float:
        return 2.0 * math.sqrt(d) * self.L ** self.xi


@dataclass(frozen=True)
class PathResult:
    """One sampled trajectory.

    Weights are stored in log scale (heavy trap fields drive them far below
    the smallest positive double); ``fk_weight`` and ``girsanov`` expose the
    linear values.
    """

    hit: bool
    T: float
    log_fk_weight: float
    log_girsanov: float
    trans_max: float
    in_A: bool
    in_B: bool
    slab_times: np.ndarray
    n_steps: int
    exhausted: bool

    @property
    def fk_weight(self) -> float:
        return math.exp(self.log_fk_weight)

    @property
    def girsanov(self) -> float:
        return math.exp(self.log_girsanov)


@dataclass(frozen=True)
class Estimate:
    """Weighted Monte Carlo average with its sampling error."""

    mean: float
    stderr: float
    n: int
    ess: float
    n_exhausted: int = 0

    @property
    def low_confidence(self) -> bool:
        return self.ess < LOW_ESS


def resolve_drift(config: PathConfig, params: ModelParams) -> float:
    if config.drift is not None:
        return config.drift
    return math.sqrt(2.0 * params.lam)


def miss_probability(L: float, drift: float, horizon: float) -> float:
    """P(a drifted BM has not yet reached level L at the horizon)."""
    if L <= 0:
        return 0.0
    s = math.sqrt(horizon)
    if drift == 0.0:
        return float(2.0 * stats.norm.cdf(L / s) - 1.0)
    a = stats.norm.cdf((L - drift * horizon) / s)
    b = math.exp(2.0 * drift * L + stats.norm.logcdf(-(L + drift * horizon) / s))
    return float(max(a - b, 0.0))


def resolve_max_steps(config: PathConfig, params: ModelParams) -> int:
    if config.max_steps is not None:
        return config.max_steps
    speed = math.sqrt(2.0 * params.lam)
    horizon = 3.0 * (config.L + 1.0) / speed + 24.0 / params.lam
    return int(math.ceil(horizon / config.dt))


def validate_budget(config: PathConfig, params: ModelParams,
                    tol: float = 1e-6) -> None:
    """Check the step budget against the configured miss tolerance.

    Passes if either the drifted walk reaches the target plane within the
    horizon with probability >= 1 - tol, or the killing weight of any
    trajectory still alive at the horizon is below tol times the free
    partition function (so missed paths cannot matter).
    """
    if config.L <= 0:
        return
    drift = resolve_drift(config, params)
    horizon = resolve_max_steps(config, params) * config.dt
    if miss_probability(config.L, drift, horizon) <= tol:
        return
    slack = params.lam * horizon - config.L * math.sqrt(2.0 * params.lam)
    if slack >= -math.log(tol):
        return
    raise BudgetError(
        f"budget horizon {horizon:g} cannot bound the miss mass by {tol:g} "
        f"for L={config.L:g}, drift={drift:g}, lam={params.lam:g}"
    )


def tube_window(L: float, xi: float, d: int, *, margin: float = 8.0,
                extra_half: float = 4.0) -> Window:
    """Window containing the tube padded by the block-avoidance distance."""
    half = L ** xi / 2.0 + 2.0 * math.sqrt(d) * L ** xi + extra_half
    lower = [-margin] + [-half] * (d - 1)
    upper = [L + margin] + [half] * (d - 1)
    return Window(lower, upper)


def _require_window(field: TrapField, config: PathConfig) -> None:
    if config.L <= 0:
        return
    d = field.params.d
    half = config.tube_halfwidth + config.block_pad(d)
    hi1 = config.L + (1.0 if config.target == BALL else 0.0)
    lo = np.array([0.0] + [-half] * (d - 1))
    hi = np.array([hi1] + [half] * (d - 1))
    if not field.window.contains_box(lo, hi):
        raise SamplerError(
            "field window does not contain the padded tube; "
            f"need [0,{hi1:g}] x [-{half:g},{half:g}]^{d - 1}, have {field.window}"
        )


def _initial_flags(config: PathConfig, d: int) -> tuple[int, int]:
    lo1, hi1 = config.block_span()
    origin = np.zeros(d)
    gap0 = max(lo1 - origin[0], origin[0] - hi1, 0.0)
    in_b = 1 if gap0 * gap0 > config.block_pad(d) ** 2 else 0
    return 1, in_b


class _Runner:
    """Validated, preassembled inputs for driving many paths of one config."""

    def __init__(self, field: TrapField, config: PathConfig):
        params = field.params
        self.d = params.d
        self.config = config
        self.drift = resolve_drift(config, params)
        self.lam = params.lam
        self.degenerate = config.L <= 0
        self.nslab = len(config.slabs)
        self.slab_bounds = (
            np.array(config.slabs, dtype=np.float64).reshape(self.nslab, 2)
            if self.nslab else np.empty((0, 2))
        )
        if not self.degenerate:
            _require_window(field, config)
            validate_budget(config, params)
        self.max_steps = resolve_max_steps(config, params)
        self.arrays = field.index_arrays()
        lo1, hi1 = config.block_span()
        self.geom = (
            config.L, self.drift, self.lam, config.dt,
            config.tube_halfwidth, lo1, hi1, config.tube_halfwidth,
            config.block_pad(self.d), config.target == BALL,
        )
        self.init_flags = _initial_flags(config, self.d)

    def drive(self, rng: np.random.Generator) -> PathResult:
        d = self.d
        nslab = self.nslab
        in_a, in_b = self.init_flags
        if self.degenerate:
            return PathResult(True, 0.0, 0.0, 0.0, 0.0, True, bool(in_b),
                              np.zeros(nslab), 0, False)
        pos = np.zeros(d)
        state = np.zeros(4)
        flags = np.array([_engine.RUNNING, in_a, in_b], dtype=np.int64)
        slab_occ = np.zeros(nslab)

        remaining = self.max_steps
        n_steps = 0
        chunk = CHUNK_START
        while remaining > 0 and flags[0] == _engine.RUNNING:
            m = min(chunk, remaining)
            chunk = min(chunk * 4, CHUNK_MAX)
            normals = rng.standard_normal((m, d))
            unifs = rng.random(m)
            consumed = _engine.walk_chunk(
                pos, state, flags, self.slab_bounds, slab_occ,
                normals, unifs, *self.arrays, *self.geom,
            )
            remaining -= consumed
            n_steps += consumed

        hit = flags[0] == _engine.HIT
        t_final = float(state[0])
        log_gir = -self.drift * float(state[3]) + 0.5 * self.drift ** 2 * t_final
        return PathResult(
            hit=bool(hit),
            T=t_final,
            log_fk_weight=float(state[1]),
            log_girsanov=float(log_gir),
            trans_max=float(state[2]),
            in_A=bool(flags[1]),
            in_B=bool(flags[2]),
            slab_times=slab_occ,
            n_steps=n_steps,
            exhausted=not hit,
        )


def simulate_path(field: TrapField, config: PathConfig,
                  rng: np.random.Generator) -> PathResult:
    """Sample one trajectory in the given trap field."""
    return _Runner(field, config).drive(rng)


@dataclass
class PathBatch:
    """Per-path arrays for a batch of independent trajectories."""

    hit: np.ndarray
    log_w: np.ndarray       # log(girsanov * fk_weight)
    trans_max: np.ndarray
    in_A: np.ndarray
    in_B: np.ndarray
    T: np.ndarray
    slab: np.ndarray
    exhausted: np.ndarray

    def indicator(self, event: str) -> np.ndarray:
        if event == "ALL":
            return self.hit
        if event == "A":
            return self.hit & self.in_A
        if event == "B":
            return self.hit & self.in_B
        raise SamplerError(f"unknown event {event!r}")


def run_paths(field: TrapField, config: PathConfig, n: int, seed: int,
              threads: int = 1) -> PathBatch:
    """Simulate n independent paths; path i uses stream ``split_seed(seed, i)``.

    Results are written into arrays indexed by path, so the outcome is
    bit-identical for any thread count.
    """
    if n < 1:
        raise SamplerError("need n >= 1 paths")
    runner = _Runner(field, config)
    nslab = len(config.slabs)
    batch = PathBatch(
        hit=np.zeros(n, bool),
        log_w=np.full(n, -np.inf),
        trans_max=np.zeros(n),
        in_A=np.zeros(n, bool),
        in_B=np.zeros(n, bool),
        T=np.zeros(n),
        slab=np.zeros((n, nslab)),
        exhausted=np.zeros(n, bool),
    )
    # identical streams to split_seed(seed, i), batch-created
    children = np.random.SeedSequence(entropy=seed).spawn(n)

    def run_block(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            res = runner.drive(np.random.Generator(np.random.Philox(children[i])))
            batch.hit[i] = res.hit
            batch.log_w[i] = res.log_fk_weight + res.log_girsanov
            batch.trans_max[i] = res.trans_max
            batch.in_A[i] = res.in_A
            batch.in_B[i] = res.in_B
            batch.T[i] = res.T
            batch.slab[i] = res.slab_times
            batch.exhausted[i] = res.exhausted

    if threads <= 1:
        run_block(0, n)
    else:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(run_block, bounds[k], bounds[k + 1])
                    for k in range(threads)]
            for f in futs:
                f.result()
    return batch


def _weights(batch: PathBatch, event: str) -> np.ndarray:
    w = np.where(batch.indicator(event), np.exp(batch.log_w), 0.0)
    return w


def estimate_from_batch(batch: PathBatch, event: str = "ALL") -> Estimate:
    w = _weights(batch, event)
    n = w.shape[0]
    mean = float(w.mean())
    stderr = float(w.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    wsq = float(np.sum(w * w))
    ess = min(float(np.sum(w) ** 2 / wsq), float(n)) if wsq > 0 else 0.0
    return Estimate(mean, stderr, n, ess, int(batch.exhausted.sum()))


def log_partition_from_batch(batch: PathBatch, event: str = "ALL") -> float:
    """log of the event-restricted partition estimate, safe for tiny weights."""
    ind = batch.indicator(event)
    if not ind.any():
        return -math.inf
    lw = batch.log_w[ind]
    m = lw.max()
    return float(m + math.log(np.exp(lw - m).sum()) - math.log(batch.log_w.shape[0]))


def estimate_Z(field: TrapField, config: PathConfig, n: int,
               event: str = "ALL", seed: int = 0, *, theta: float = 0.0,
               threads: int = 1) -> Estimate:
    """Monte Carlo estimate of the (event-restricted) partition function.

    ``event="A_theta"`` estimates the rotated-tube restriction by rotating
    the environment by -theta and estimating the plain tube event, which is
    the same quantity by rotation invariance of the free motion.
    """
    if event == "A_theta":
        return estimate_Z(rotated_environment(field, theta), config, n,
                          event="A", seed=seed, threads=threads)
    if event not in ("ALL", "A", "B"):
        raise SamplerError(f"unknown event {event!r}")
    batch = run_paths(field, config, n, seed, threads)
    return estimate_from_batch(batch, event)


def rotated_environment(field: TrapField, theta: float) -> TrapField:
    from .field import rotate_field
    return rotate_field(field, -theta)


# -- weighted path-measure observables ---------------------------------------


def normalized_weights(batch: PathBatch, event: str = "ALL") -> np.ndarray:
    """Self-normalized weights on the event, computed in log scale."""
    ind = batch.indicator(event)
    if not ind.any():
        raise SamplerError("no surviving paths in the requested event")
    lw = np.where(ind, batch.log_w, -np.inf)
    m = lw[ind].max()
    w = np.exp(lw - m)
    return w / w.sum()


def weighted_mean(values: np.ndarray, omega: np.ndarray) -> tuple[float, float]:
    """Self-normalized mean and its delta-method standard error."""
    mean = float(np.sum(omega * values))
    se = float(math.sqrt(np.sum(omega ** 2 * (values - mean) ** 2)))
    return mean, se


@dataclass(frozen=True)
class SlabOccupation:
    estimate: Estimate
    below_threshold_frac: float
    threshold: float
    slab: tuple[float, float]


def slab_occupation_stats(field: TrapField, config: PathConfig, a: float,
                          n: int, seed: int = 0, *, event: str = "A",
                          eps: float = 0.05, threads: int = 1) -> SlabOccupation:
    """Occupation time of the slab [a, a + L^xi] under the weighted measure.

    Also reports the weighted frequency of occupation <= L^(xi - eps), the
    short-crossing tail.
    """
    width = config.L ** config.xi
    if not 0 <= a <= config.L - width:
        raise SamplerError(f"slab anchor must lie in [0, {config.L - width:g}]")
    cfg = PathConfig(L=config.L, xi=config.xi, dt=config.dt, drift=config.drift,
                     max_steps=config.max_steps, target=config.target,
                     slabs=((a, a + width),))
    batch = run_paths(field, cfg, n, seed, threads)
    omega = normalized_weights(batch, event)
    occ = batch.slab[:, 0]
    mean, se = weighted_mean(occ, omega)
    ess = min(float(1.0 / np.sum(omega ** 2)), float(n))
    threshold = config.L ** (config.xi - eps)
    below = float(np.sum(omega * (occ <= threshold)))
    est = Estimate(mean, se, n, ess, int(batch.exhausted.sum()))
    return SlabOccupation(est, below, threshold, (a, a + width))


# -- transversal fluctuation scans -------------------------------------------


@dataclass(frozen=True)
class FluctuationRow:
    L: float
    mean_log_trans: float
    stderr: float
    ess: float


@dataclass(frozen=True)
class FluctuationReport:
    rows: tuple[FluctuationRow, ...]
    slope: float
    slope_stderr: float
    slope_ci: tuple[float, float]

    @property
    def low_confidence(self) -> bool:
        return any(r.ess < LOW_ESS for r in self.rows)


def _fit_slope(logL: np.ndarray, y: np.ndarray) -> float:
    x = logL - logL.mean()
    return float(np.sum(x * (y - y.mean())) / np.sum(x * x))


def measure_fluctuation(params: ModelParams, L_grid, xi_probe: float,
                        n_per_L: int, master_seed: int, *,
                        fields_per_point: int = 1, with_traps: bool = True,
                        dt: float = 1e-2, drift: float | None = None,
                        threads: int = 1, n_boot: int = 200,
                        window_margin: float = 8.0) -> FluctuationReport:
    """Scaling of the transversal maximum under the weighted path measure.

    For each L the observable is the self-normalized weighted mean of
    log(trans_max), averaged over independent trap fields; the report fits
    the least-squares slope against log L with a bootstrap confidence
    interval (resampling fields, or paths when there is a single field
    per L).
    """
    L_grid = [float(L) for L in L_grid]
    if len(L_grid) < 3:
        raise SamplerError("need at least 3 values of L to fit a slope")
    if sorted(L_grid) != L_grid:
        raise SamplerError("L_grid must be increasing")
    d = params.d
    if d < 2:
        raise SamplerError("transversal fluctuations need d >= 2")

    rows = []
    field_means: list[np.ndarray] = []
    path_data: list[list[tuple[np.ndarray, np.ndarray]]] = []
    for li, L in enumerate(L_grid):
        cfg = PathConfig(L=L, xi=xi_probe, dt=dt, drift=drift)
        window = tube_window(L, xi_probe, d, margin=window_margin)
        means = []
        per_field = []
        ess_min = math.inf
        for fi in range(fields_per_point):
            if with_traps:
                fseed = int(substream(master_seed, 1, li, fi).integers(2 ** 62))
                fld = sample_field(params, window, fseed)
            else:
                fld = TrapField.empty(params, window, seed=0)
            pseed = int(substream(master_seed, 2, li, fi).integers(2 ** 62))
            batch = run_paths(fld, cfg, n_per_L, pseed, threads)
            omega = normalized_weights(batch, "ALL")
            keep = omega > 0
            vals = np.log(batch.trans_max[keep])
            m, _ = weighted_mean(vals, omega[keep] / omega[keep].sum())
            means.append(m)
            per_field.append((vals, omega[keep] / omega[keep].sum()))
            ess_min = min(ess_min, 1.0 / np.sum(omega ** 2))
        means = np.array(means)
        se = (float(means.std(ddof=1) / math.sqrt(len(means)))
              if len(means) > 1 else 0.0)
        rows.append(FluctuationRow(L, float(means.mean()), se, float(ess_min)))
        field_means.append(means)
        path_data.append(per_field)

    logL = np.log(np.array(L_grid))
    y = np.array([r.mean_log_trans for r in rows])
    slope = _fit_slope(logL, y)

    boot_rng = substream(master_seed, 3)
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        yb = np.empty(len(L_grid))
        for li in range(len(L_grid)):
            fm = field_means[li]
            if len(fm) > 1:
                pick = boot_rng.integers(0, len(fm), len(fm))
                yb[li] = fm[pick].mean()
            else:
                vals, om = path_data[li][0]
                pick = boot_rng.choice(len(vals), len(vals), p=om)
                yb[li] = vals[pick].mean()
        slopes[b] = _fit_slope(logL, yb)
    ci = (float(np.quantile(slopes, 0.025)), float(np.quantile(slopes, 0.975)))
    return FluctuationReport(tuple(rows), slope, float(slopes.std(ddof=1)), ci)


# -- rotation exchangeability -------------------------------------------------


@dataclass(frozen=True)
class RotationReport:
    theta: float
    n_rotations: int
    n_fields: int
    center_max_freq: float
    expected_freq: float
    sigma: float
    zscore: float
    n_ties: int
    argmax_counts: tuple[int, ...]

    @property
    def within_3_sigma(self) -> bool:
        return abs(self.center_max_freq - self.expected_freq) <= 3.0 * self.sigma


def rotation_exchange_test(params: ModelParams, L: float, xi: float, N: int,
                           n_fields: int, n_paths: int, master_seed: int, *,
                           theta: float | None = None, dt: float = 1e-2,
                           drift: float | None = None,
                           threads: int = 1) -> RotationReport:
    """Frequency with which the unrotated tube carries the largest weight.

    For each field the tube partition function is estimated under the
    rotations i*theta, i in {-N..N}, reusing the same trajectories; under
    exchangeability of the rotated environments the argmax is uniform, so
    the i=0 frequency should sit near 1/(2N+1).  Exact ties are broken
    toward the smallest |i| and reported as degenerate.
    """
    if params.d < 2:
        raise SamplerError("rotations need d >= 2")
    if N < 1:
        raise SamplerError("need N >= 1")
    if theta is None:
        theta = 10.0 * math.sqrt(params.d) * L ** (xi - 1.0)
    cfg = PathConfig(L=L, xi=xi, dt=dt, drift=drift)

    half = L ** xi / 2.0 + 2.0 * math.sqrt(params.d) * L ** xi
    radius = math.hypot(L, math.sqrt(params.d - 1) * half) + 8.0
    window = Window([-radius] * params.d, [radius] * params.d)

    from .field import rotate_field

    idx = list(range(-N, N + 1))
    counts = np.zeros(2 * N + 1, dtype=int)
    ties = 0
    for fi in range(n_fields):
        fseed = int(substream(master_seed, 11, fi).integers(2 ** 62))
        base = sample_field(params, window, fseed)
        pseed = int(substream(master_seed, 12, fi).integers(2 ** 62))
        logz = np.empty(len(idx))
        for k, i in enumerate(idx):
            fld = base if i == 0 else rotate_field(base, i * theta)
            batch = run_paths(fld, cfg, n_paths, pseed, threads)
            logz[k] = log_partition_from_batch(batch, "A")
        best = logz.max()
        winners = [i for k, i in enumerate(idx) if logz[k] == best]
        if len(winners) > 1:
            ties += 1
        winner = min(winners, key=lambda i: (abs(i), i < 0))
        counts[winner + N] += 1

    p = 1.0 / (2 * N + 1)
    freq = counts[N] / n_fields
    sigma = math.sqrt(p * (1 - p) / n_fields)
    z = (freq - p) / sigma
    return RotationReport(theta, 2 * N + 1, n_fields, float(freq), p, sigma,
                          float(z), ties, tuple(int(c) for c in counts))
