import math

import numpy as np
import pytest

from trapwalk.exponents import (ExponentInput, TheoryError,
                                analytic_covariance, ball_overlap,
                                ball_overlap_closed, bar_xi, covariance_slope,
                                feasibility, lower_bound_exponent,
                                mc_covariance, p2p_bound, potential_variance,
                                sup_feasible_xi)
from trapwalk.field import ModelParams


class TestBarXi:
    def test_small_gamma_branch(self):
        assert bar_xi(ExponentInput(2, 2.5, 0.3)) == pytest.approx(1 / 1.5)

    def test_branch_boundary_identity(self):
        for d in (1, 2, 3):
            for alpha in np.linspace(d + 0.1, d + 3.0, 20):
                g = alpha - d
                b1 = 1.0 / (alpha - d + 1.0)
                b2 = 3.0 / (3.0 + alpha + 2 * g - d)
                assert abs(b1 - b2) <= 1e-12
                assert bar_xi(ExponentInput(d, float(alpha), float(g))) == (
                    pytest.approx(b1, abs=1e-12))

    def test_diffusive_floor(self):
        inp = ExponentInput(2, 4.0, 1.0)
        assert bar_xi(inp) == pytest.approx(1 / 3)
        assert lower_bound_exponent(inp) == 0.5

    def test_rejects_bad_input(self):
        with pytest.raises(TheoryError):
            ExponentInput(2, 1.0, 0.5)
        with pytest.raises(TheoryError):
            ExponentInput(0, 1.0, 1.0)


class TestFeasibility:
    def test_examples(self):
        inp = ExponentInput(2, 2.5, 0.3)
        assert feasibility(inp, 0.6) == (True, True)
        first, second = feasibility(inp, 0.7)
        assert first and not second  # (d-1-a) xi + 1 = -0.05

    def test_small_xi_always_feasible(self):
        for d, a, g in ((1, 1.0, 1.5), (2, 3.0, 2.0), (3, 4.0, 0.5)):
            inp = ExponentInput(d, a, g)
            assert feasibility(inp, 1e-9) == (True, True)

    def test_rejects_xi_outside(self):
        with pytest.raises(TheoryError):
            feasibility(ExponentInput(2, 2.5, 0.3), 1.0)


class TestSupFeasible:
    def test_matches_closed_form_on_grid(self):
        for d in (1, 2, 3):
            for alpha in np.linspace(max(0.3, d - 1.0), d + 3.0, 10):
                for g_off in np.linspace(0.05, 3.0, 10):
                    gamma = max(0.0, d - alpha) + g_off
                    inp = ExponentInput(d, float(alpha), float(gamma))
                    closed = min(
                        3.0 / (3.0 + alpha + 2 * gamma - d),
                        1.0 / (alpha + 1 - d) if alpha + 1 - d > 0 else 1.0,
                        1.0)
                    assert abs(sup_feasible_xi(inp) - closed) <= 1e-9

    def test_boundary_example(self):
        assert sup_feasible_xi(ExponentInput(3, 1.0, 2.0)) == pytest.approx(
            0.6, abs=1e-9)

    def test_second_condition_never_binds_when_alpha_small(self):
        # alpha + 1 - d <= 0: only the gain condition can bind on (0, 1)
        inp = ExponentInput(3, 1.5, 2.0)
        for xi in (0.1, 0.5, 0.9, 0.999):
            assert feasibility(inp, xi)[1]


class TestP2P:
    def test_example(self):
        assert p2p_bound(ExponentInput(2, 2.0, 0.5)) == pytest.approx(0.5)

    def test_fixed_point_identity(self):
        for d, a, g in ((2, 2.0, 0.5), (1, 1.5, 1.0), (3, 2.5, 1.5)):
            inp = ExponentInput(d, a, g)
            xi = p2p_bound(inp)
            assert abs(((d + 1 - a - 2 * g) * xi + 1) / 2 - xi) <= 1e-12

    def test_never_beats_plane_branch(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = int(rng.integers(1, 4))
            alpha = float(rng.uniform(0.2, d + 3))
            gamma = max(0.0, d - alpha) + float(rng.uniform(0.05, 3))
            inp = ExponentInput(d, alpha, gamma)
            assert p2p_bound(inp) <= 3.0 / (3.0 + alpha + 2 * gamma - d) + 1e-12


class TestOverlap:
    def test_closed_forms_match_general(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            d = int(rng.integers(1, 4))
            r = float(rng.uniform(0.5, 5.0))
            s = float(rng.uniform(0.0, 2.5 * r))
            a = ball_overlap(d, s, r)
            b = ball_overlap_closed(d, s, r)
            assert a == pytest.approx(b, abs=1e-10 * max(1.0, b))

    def test_disjoint(self):
        assert ball_overlap(2, 4.1, 2.0) == 0.0

    def test_monotone_in_distance(self):
        vals = [ball_overlap(3, s, 1.5) for s in np.linspace(0, 3.2, 20)]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


class TestCovariance:
    def test_variance_closed_form(self):
        p = ModelParams(d=1, alpha=1.5, gamma=1.0, lam=0.5, r_max=np.inf)
        assert potential_variance(p) == pytest.approx(1.2)
        assert analytic_covariance(p, 0.0) == pytest.approx(1.2, rel=1e-8)

    def test_vanishes_beyond_diameter(self):
        p = ModelParams(d=2, alpha=3.0, gamma=1.0, lam=0.5, r_max=5.0)
        assert analytic_covariance(p, 10.5) == 0.0

    def test_nonincreasing(self):
        p = ModelParams(d=2, alpha=3.0, gamma=1.0, lam=0.5, r_max=50.0)
        vals = [analytic_covariance(p, s) for s in (0.0, 1.0, 2.0, 5.0, 20.0)]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_loglog_slope(self):
        p = ModelParams(d=1, alpha=1.5, gamma=1.0, lam=0.5, r_max=1e4)
        slope = covariance_slope(p, np.geomspace(10, 100, 16))
        assert slope == pytest.approx(1 - 1.5 - 2.0, abs=0.1)

    def test_mc_matches_analytic(self):
        p = ModelParams(d=2, alpha=3.0, gamma=1.0, lam=0.5, r_max=50.0)
        for s in (0.0, 2.0, 5.0):
            est = mc_covariance(p, s, 3000, master_seed=5)
            ref = analytic_covariance(p, s)
            assert abs(est.mean - ref) <= 3 * est.stderr

    def test_isotropy(self):
        p = ModelParams(d=2, alpha=3.0, gamma=1.0, lam=0.5, r_max=20.0)
        e1 = mc_covariance(p, 2.0, 3000, master_seed=6, probe_axis=0)
        e2 = mc_covariance(p, 2.0, 3000, master_seed=7, probe_axis=1)
        comb = math.hypot(e1.stderr, e2.stderr)
        assert abs(e1.mean - e2.mean) <= 3 * comb

    def test_s0_equals_sample_variance(self):
        p = ModelParams(d=2, alpha=3.0, gamma=1.0, lam=0.5, r_max=20.0)
        est = mc_covariance(p, 0.0, 2000, master_seed=8)
        assert abs(est.mean - potential_variance(p)) <= 3 * est.stderr
