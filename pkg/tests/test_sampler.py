import math

import numpy as np
import pytest

from trapwalk.field import ModelParams, TrapField, Window, sample_field
from trapwalk.rng import split_seed
from trapwalk.sampler import (BudgetError, PathConfig, SamplerError,
                              estimate_Z, estimate_from_batch,
                              measure_fluctuation, miss_probability,
                              rotation_exchange_test, run_paths,
                              simulate_path, slab_occupation_stats,
                              tube_window, validate_budget)

PARAMS = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=8.0)
EXACT_Z2 = math.exp(-2.0)  # free motion, L=2, lam=0.5


def empty(L, xi=0.5, **kw):
    return TrapField.empty(PARAMS, tube_window(L, xi, 2, **kw))


class TestConfig:
    def test_rejects_bad_xi(self):
        with pytest.raises(SamplerError):
            PathConfig(L=2.0, xi=1.2)

    def test_rejects_bad_dt(self):
        with pytest.raises(SamplerError):
            PathConfig(L=2.0, dt=0.0)

    def test_budget_check_rejects_tiny_horizon(self):
        cfg = PathConfig(L=50.0, xi=0.5, drift=0.0, max_steps=10)
        with pytest.raises(BudgetError):
            validate_budget(cfg, PARAMS)

    def test_budget_check_accepts_drifted(self):
        cfg = PathConfig(L=10.0, xi=0.5)
        validate_budget(cfg, PARAMS)

    def test_miss_probability_limits(self):
        assert miss_probability(2.0, 1.0, 1e4) < 1e-12
        assert 0.9 < miss_probability(50.0, 0.0, 1.0) <= 1.0


class TestSimulatePath:
    def test_degenerate_target(self):
        res = simulate_path(empty(4.0), PathConfig(L=0.0), split_seed(0, 0))
        assert res.hit and res.T == 0.0 and res.fk_weight == 1.0

    def test_window_too_small(self):
        fld = TrapField.empty(PARAMS, Window([0, -1], [4, 1]))
        with pytest.raises(SamplerError):
            simulate_path(fld, PathConfig(L=4.0, xi=0.5), split_seed(0, 0))

    def test_weight_bounded_by_free_weight(self):
        fld = sample_field(PARAMS, tube_window(6.0, 0.5, 2), 4)
        cfg = PathConfig(L=6.0, xi=0.5)
        for i in range(50):
            res = simulate_path(fld, cfg, split_seed(1, i))
            if res.hit:
                assert 0 < res.fk_weight <= math.exp(-PARAMS.lam * res.T) + 1e-12

    def test_budget_exhaustion_flag(self):
        # undrifted walk, short horizon: admissible because the killing
        # weight bound holds, but the path cannot reach the plane
        cfg = PathConfig(L=30.0, xi=0.5, drift=0.0, max_steps=800)
        params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=40.0, r_max=4.0)
        fld = TrapField.empty(params, tube_window(30.0, 0.5, 2))
        res = simulate_path(fld, cfg, split_seed(0, 5))
        assert not res.hit and res.exhausted

    def test_event_disjointness(self):
        fld = sample_field(PARAMS, tube_window(12.0, 0.6, 2), 9)
        cfg = PathConfig(L=12.0, xi=0.6)
        batch = run_paths(fld, cfg, 400, seed=2)
        both = batch.hit & batch.in_A & batch.in_B
        assert not both.any()


class TestFreePartition:
    def test_matches_hitting_transform(self):
        est = estimate_Z(empty(2.0), PathConfig(L=2.0, xi=0.5), 20_000,
                         "ALL", seed=3)
        assert abs(est.mean - EXACT_Z2) <= 3 * est.stderr + 1e-12
        assert est.ess <= est.n

    def test_drift_pair_consistency(self):
        # by the exact discrete change of drift both runs estimate the same
        # quantity; the bridge correction keeps the residual discretization
        # bias below the Monte Carlo noise
        cfg0 = PathConfig(L=2.0, xi=0.5, dt=5e-3, drift=0.0, max_steps=40_000)
        cfg1 = PathConfig(L=2.0, xi=0.5, dt=5e-3, drift=1.0)
        e0 = estimate_Z(empty(2.0), cfg0, 20_000, "ALL", seed=4)
        e1 = estimate_Z(empty(2.0), cfg1, 20_000, "ALL", seed=5)
        comb = math.hypot(e0.stderr, e1.stderr)
        assert abs(e0.mean - e1.mean) <= 3 * comb + 1e-12

    def test_dt_refinement(self):
        # reported discretization drift at a suboptimal drift stays small
        ests = []
        for dt in (2e-2, 1e-2):
            cfg = PathConfig(L=2.0, xi=0.5, dt=dt, drift=0.6)
            ests.append(estimate_Z(empty(2.0), cfg, 20_000, "ALL", seed=6))
        rel = abs(ests[0].mean - ests[1].mean) / ests[1].mean
        assert rel <= 0.02


class TestEvents:
    def _batch(self, xi, seed=7, L=8.0, n=2000):
        cfg = PathConfig(L=L, xi=xi)
        return run_paths(empty(L, xi), cfg, n, seed=seed)

    def test_event_additivity_bound(self):
        batch = self._batch(0.6)
        z_all = estimate_from_batch(batch, "ALL").mean
        z_a = estimate_from_batch(batch, "A").mean
        z_b = estimate_from_batch(batch, "B").mean
        assert z_a + z_b <= z_all + 1e-12

    def test_tube_ratio_monotone_in_xi(self):
        # identical paths, nested tube events
        ratios = []
        for xi in (0.5, 0.7, 0.9):
            batch = self._batch(xi, seed=8)
            z_all = estimate_from_batch(batch, "ALL").mean
            z_a = estimate_from_batch(batch, "A").mean
            ratios.append(z_a / z_all)
        assert ratios[0] <= ratios[1] <= ratios[2]
        # near xi = 1 the tube dwarfs the diffusive spread
        batch99 = self._batch(0.99, seed=8, L=64.0, n=400)
        r99 = (estimate_from_batch(batch99, "A").mean
               / estimate_from_batch(batch99, "ALL").mean)
        assert r99 > 0.9

    def test_trap_addition_never_raises_weights(self):
        fld = sample_field(PARAMS, tube_window(6.0, 0.5, 2), 21)
        more = fld.with_traps_added(np.array([[3.0, 0.0]]), np.array([2.0]))
        cfg = PathConfig(L=6.0, xi=0.5)
        b1 = run_paths(fld, cfg, 500, seed=9)
        b2 = run_paths(more, cfg, 500, seed=9)
        assert np.all(b2.log_w <= b1.log_w + 1e-12)


class TestRotatedTubeEvent:
    def test_zero_angle_equals_plain_tube(self):
        fld = sample_field(PARAMS, tube_window(8.0, 0.6, 2), 41)
        cfg = PathConfig(L=8.0, xi=0.6)
        plain = estimate_Z(fld, cfg, 1000, "A", seed=30)
        rotated = estimate_Z(fld, cfg, 1000, "A_theta", seed=30, theta=0.0)
        assert plain == rotated

    def test_empty_field_rotation_invariant(self):
        # with no traps the rotated-tube estimate is the path functional
        # alone; any angle gives the identical value on common paths
        big = Window([-30.0, -30.0], [30.0, 30.0])
        fld = TrapField.empty(PARAMS, big)
        cfg = PathConfig(L=8.0, xi=0.6)
        base = estimate_Z(fld, cfg, 1000, "A", seed=31)
        rot = estimate_Z(fld, cfg, 1000, "A_theta", seed=31, theta=0.4)
        assert base == rot


class TestDeterminism:
    def test_same_seed_bit_identical(self):
        cfg = PathConfig(L=4.0, xi=0.5)
        e1 = estimate_Z(empty(4.0), cfg, 3000, "ALL", seed=10)
        e2 = estimate_Z(empty(4.0), cfg, 3000, "ALL", seed=10)
        assert e1 == e2

    def test_thread_count_invariance(self):
        fld = sample_field(PARAMS, tube_window(6.0, 0.5, 2), 33)
        cfg = PathConfig(L=6.0, xi=0.5)
        e1 = estimate_Z(fld, cfg, 2000, "A", seed=11, threads=1)
        e4 = estimate_Z(fld, cfg, 2000, "A", seed=11, threads=4)
        assert e1 == e4

    def test_different_seeds_differ(self):
        cfg = PathConfig(L=4.0, xi=0.5, drift=0.2)
        e1 = estimate_Z(empty(4.0), cfg, 500, "ALL", seed=12)
        e2 = estimate_Z(empty(4.0), cfg, 500, "ALL", seed=13)
        assert e1.mean != e2.mean


class TestSlabs:
    def test_partition_identity(self):
        # a slab partition covering every visited first coordinate receives
        # each step's full time increment exactly once
        L = 6.0
        edges = np.arange(-40.0, L + 10.0, 2.0)
        slabs = tuple((float(a), float(b)) for a, b in zip(edges, edges[1:]))
        cfg = PathConfig(L=L, xi=0.5, slabs=slabs)
        batch = run_paths(empty(L), cfg, 200, seed=14)
        total = batch.slab.sum(axis=1)
        assert np.allclose(total, batch.T, rtol=0, atol=1e-9)

    def test_interval_partition_undercounts(self):
        L = 6.0
        edges = np.linspace(0.0, L, 7)
        slabs = tuple((float(a), float(b)) for a, b in zip(edges, edges[1:]))
        cfg = PathConfig(L=L, xi=0.5, slabs=slabs)
        batch = run_paths(empty(L), cfg, 200, seed=15)
        assert np.all(batch.slab.sum(axis=1) <= batch.T + 1e-9)

    def test_ballistic_occupation(self):
        # drifted crossing of a unit slab takes 1/drift on average
        L = 10.0
        cfg = PathConfig(L=L, xi=0.5)
        res = slab_occupation_stats(empty(L), cfg, a=3.0, n=4000, seed=16,
                                    event="ALL")
        width = L ** 0.5
        expect = width / math.sqrt(2 * PARAMS.lam)
        assert res.estimate.mean == pytest.approx(expect, rel=0.10)
        assert 0.0 <= res.below_threshold_frac <= 1.0

    def test_anchor_range_checked(self):
        cfg = PathConfig(L=10.0, xi=0.5)
        with pytest.raises(SamplerError):
            slab_occupation_stats(empty(10.0), cfg, a=9.0, n=10, seed=0)


class TestFluctuation:
    def test_needs_three_points(self):
        with pytest.raises(SamplerError):
            measure_fluctuation(PARAMS, [8.0], 0.5, 100, 0, with_traps=False)
        with pytest.raises(SamplerError):
            measure_fluctuation(PARAMS, [8.0, 16.0], 0.5, 100, 0,
                                with_traps=False)

    def test_free_slope_coarse(self):
        rep = measure_fluctuation(PARAMS, [8, 16, 32], 0.5, 2000, 17,
                                  with_traps=False)
        assert rep.slope == pytest.approx(0.5, abs=0.1)
        assert rep.slope_ci[0] < rep.slope < rep.slope_ci[1]

    def test_requires_transversal_dimension(self):
        p1 = ModelParams(d=1, alpha=1.5, gamma=1.0, lam=0.5, r_max=4.0)
        with pytest.raises(SamplerError):
            measure_fluctuation(p1, [8, 16, 32], 0.5, 100, 0, with_traps=False)


class TestRotation:
    def test_free_field_ties_are_degenerate(self):
        params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=2.0)
        # traps off: every rotation sees the same (empty) environment
        rep = rotation_exchange_test(params, L=4.0, xi=0.6, N=1, n_fields=10,
                                     n_paths=50, master_seed=18, dt=2e-2,
                                     theta=0.0)
        assert rep.n_ties == 10
        assert rep.center_max_freq == 1.0  # ties break toward i = 0

    def test_exchangeability_coarse(self):
        params = ModelParams(d=2, alpha=2.0, gamma=1.0, lam=0.5, r_max=8.0)
        rep = rotation_exchange_test(params, L=12.0, xi=0.6, N=1, n_fields=60,
                                     n_paths=64, master_seed=19, dt=2e-2)
        assert rep.n_ties == 0
        assert abs(rep.center_max_freq - rep.expected_freq) <= 4 * rep.sigma

    def test_needs_two_dims(self):
        p1 = ModelParams(d=1, alpha=1.5, gamma=1.0, lam=0.5, r_max=4.0)
        with pytest.raises(SamplerError):
            rotation_exchange_test(p1, 8.0, 0.6, 1, 5, 10, 0)


class TestBallTarget:
    def test_hits_and_weights(self):
        # the drifted walk can overshoot the ball sideways for good, so a
        # substantial miss fraction is expected and flagged as exhausted
        L = 6.0
        cfg = PathConfig(L=L, xi=0.5, target="ball")
        batch = run_paths(empty(L), cfg, 2000, seed=22)
        assert batch.hit.mean() > 0.3
        assert np.all(batch.hit == ~batch.exhausted)
        est = estimate_from_batch(batch, "ALL")
        assert est.mean > 0
        assert np.all(np.isfinite(batch.log_w[batch.hit]))

    def test_ball_z_below_nearest_plane_z(self):
        # the unit ball around (L, 0) lies in the halfspace x1 >= L - 1, so
        # its hitting time dominates that plane's and so does the weight
        L = 6.0
        plane = estimate_Z(empty(L), PathConfig(L=L - 1.0, xi=0.5), 4000,
                           seed=23)
        ball = estimate_Z(empty(L), PathConfig(L=L, xi=0.5, target="ball"),
                          4000, seed=23)
        assert ball.mean <= plane.mean + 3 * math.hypot(ball.stderr,
                                                        plane.stderr)
