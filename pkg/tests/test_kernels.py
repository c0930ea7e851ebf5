import math

import numpy as np
import pytest
from scipy import integrate

from trapwalk.kernels import (KernelError, KernelQuery,
                              boundary_gap, dirichlet_kernel_box,
                              dirichlet_kernel_unit, hitting_time_cdf,
                              kernel_bounds_check, series_tail_bound,
                              slab_exit_tail, two_sided_max_tail)


class TestUnitKernel:
    def test_boundary_vanishes(self):
        assert dirichlet_kernel_unit(0.0, 0.3, 0.5) == 0.0
        assert dirichlet_kernel_unit(0.4, 1.0, 0.5) == 0.0

    def test_center_value(self):
        # independent evaluation from the first two contributing terms
        expect = 2 * math.exp(-math.pi ** 2 / 2) + 2 * math.exp(-9 * math.pi ** 2 / 2)
        val = dirichlet_kernel_unit(0.5, 0.5, 1.0, terms=50)
        assert val == pytest.approx(expect, abs=1e-15)
        assert val == pytest.approx(0.014384, abs=5e-7)

    def test_truncation_bound(self):
        t = 0.05
        coarse = dirichlet_kernel_unit(0.3, 0.7, t, terms=8)
        fine = dirichlet_kernel_unit(0.3, 0.7, t, terms=200)
        assert abs(fine - coarse) <= series_tail_bound(t, 8)

    def test_rejects_bad_time(self):
        with pytest.raises(KernelError):
            dirichlet_kernel_unit(0.5, 0.5, 0.0)

    def test_nonnegative_with_tail_slack(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            x, y = rng.uniform(0, 1, 2)
            t = rng.uniform(0.05, 3.0)
            val = dirichlet_kernel_unit(x, y, t)
            assert val >= -series_tail_bound(t, 64)

    def test_substochastic_and_decreasing(self):
        for x in (0.2, 0.5, 0.8):
            prev = None
            for t in (0.1, 0.3, 1.0, 2.0):
                mass, _ = integrate.quad(
                    lambda y: dirichlet_kernel_unit(x, y, t), 0, 1,
                    epsabs=1e-10)
                assert mass <= 1.0 + 1e-8
                if prev is not None:
                    assert mass <= prev + 1e-8
                prev = mass

    def test_killed_walk_histogram_coarse(self):
        # bridge-corrected Euler walks; the acceptance suite runs the
        # full-size version of this oracle
        t, x0, n, steps = 0.2, 0.5, 100_000, 200
        dt = t / steps
        rng = np.random.default_rng(42)
        pos = np.full(n, x0)
        alive = np.ones(n, bool)
        sdt = math.sqrt(dt)
        for _ in range(steps):
            new = pos + sdt * rng.standard_normal(n)
            u = rng.random(n)
            crossed = (new <= 0) | (new >= 1)
            with np.errstate(over="ignore"):
                p = (np.exp(-2 * np.maximum(pos, 0) * np.maximum(new, 0) / dt)
                     + np.exp(-2 * np.maximum(1 - pos, 0)
                              * np.maximum(1 - new, 0) / dt))
            alive &= ~(crossed | (u < p))
            pos = np.where(alive, new, pos)
        edges = np.arange(0.25, 0.75 + 1e-9, 0.1)
        hist, _ = np.histogram(pos[alive], bins=edges)
        dens = hist / n / np.diff(edges)
        for k in range(len(edges) - 1):
            mid = 0.5 * (edges[k] + edges[k + 1])
            ref = dirichlet_kernel_unit(x0, mid, t)
            assert dens[k] == pytest.approx(ref, rel=0.05)


class TestBoxKernel:
    def test_single_dim_rescaling(self):
        q = KernelQuery((0.1,), (-0.2,), 0.3)
        w = 2.0
        direct = dirichlet_kernel_box(q, w, 1)
        manual = dirichlet_kernel_unit(0.1 / w + 0.5, -0.2 / w + 0.5,
                                       0.3 / w ** 2) / w
        assert direct == pytest.approx(manual, rel=1e-14)

    def test_symmetry(self):
        q = KernelQuery((0.1, -0.3), (0.2, 0.4), 0.7)
        qr = KernelQuery(q.y, q.x, q.t)
        assert dirichlet_kernel_box(q, 1.0, 2) == pytest.approx(
            dirichlet_kernel_box(qr, 1.0, 2), abs=1e-12)

    def test_chapman_kolmogorov(self):
        s = t = 0.1
        x, y = 0.15, -0.2

        def lhs():
            val, _ = integrate.quad(
                lambda z: dirichlet_kernel_unit(x + 0.5, z + 0.5, s)
                * dirichlet_kernel_unit(z + 0.5, y + 0.5, t),
                -0.5, 0.5, epsabs=1e-12, limit=200)
            return val

        rhs = dirichlet_kernel_unit(x + 0.5, y + 0.5, s + t)
        assert abs(lhs() - rhs) <= 1e-6

    def test_rejects_outside(self):
        with pytest.raises(KernelError):
            dirichlet_kernel_box(KernelQuery((0.8,), (0.0,), 0.1), 1.0, 1)


class TestBounds:
    def test_upper_bound_random(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            q = KernelQuery((float(rng.uniform(-0.5, 0.5)),),
                            (float(rng.uniform(-0.5, 0.5)),),
                            float(rng.uniform(0.02, 5.0)))
            rep = kernel_bounds_check(q, 1.0)
            assert rep.upper_ok

    def test_lower_bound_large_time(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            q = KernelQuery((float(rng.uniform(-0.49, 0.49)),),
                            (float(rng.uniform(-0.49, 0.49)),),
                            float(rng.uniform(2.0, 6.0)))
            rep = kernel_bounds_check(q, 1.0, lower_t_threshold=2.0)
            assert rep.lower_ok

    def test_boundary_gap_vanishes(self):
        assert boundary_gap([0.5], 1.0) == 0.0
        rep = kernel_bounds_check(KernelQuery((0.5,), (0.1,), 0.5), 1.0)
        assert rep.upper_bound == 0.0 and rep.upper_ok


class TestHittingLaw:
    def test_values(self):
        assert hitting_time_cdf(1.0, 1.0) == pytest.approx(0.317311, abs=1e-6)
        assert hitting_time_cdf(2.0, 1.0) == pytest.approx(0.045500, abs=1e-6)

    def test_monotonicity(self):
        s_vals = [0.5, 1.0, 2.0, 10.0]
        cdf_s = [hitting_time_cdf(1.0, s) for s in s_vals]
        assert all(a < b for a, b in zip(cdf_s, cdf_s[1:]))
        r_vals = [0.5, 1.0, 2.0]
        cdf_r = [hitting_time_cdf(r, 1.0) for r in r_vals]
        assert all(a > b for a, b in zip(cdf_r, cdf_r[1:]))

    def test_recurrence_limit(self):
        assert hitting_time_cdf(1.0, 1e12) == pytest.approx(1.0, abs=1e-5)

    def test_rejects_nonpositive(self):
        with pytest.raises(KernelError):
            hitting_time_cdf(0.0, 1.0)
        with pytest.raises(KernelError):
            hitting_time_cdf(1.0, -1.0)


class TestSlabExit:
    def test_zero_time(self):
        res = slab_exit_tail(1.0, 0.0)
        assert res.asymptotic == 0.0 and res.exact == 0.0

    def test_far_tail_ratio(self):
        # at halfwidth/sqrt(t) = 4 the one-term asymptotic overshoots the
        # reflection series by the Mills-ratio correction, about 5.3%
        res = slab_exit_tail(4.0, 1.0)
        gap = abs(res.exact - res.asymptotic) / res.asymptotic
        assert gap <= 0.06
        assert res.exact == pytest.approx(4 * 3.16712418e-5, rel=1e-4)

    def test_exact_dominates_half_asymptotic(self):
        for a in (2.0, 3.0, 4.0, 6.0):
            res = slab_exit_tail(a, 1.0)
            assert res.exact >= res.asymptotic / 2

    def test_reflection_series_against_walk_maxima(self):
        a = 1.5
        n, steps = 200_000, 400
        dt = 1.0 / steps
        sdt = math.sqrt(dt)
        rng = np.random.default_rng(11)
        pos = np.zeros(n)
        hit = np.zeros(n, bool)
        for _ in range(steps):
            new = pos + sdt * rng.standard_normal(n)
            u = rng.random(n)
            with np.errstate(over="ignore"):
                p_up = np.exp(-2 * np.maximum(a - pos, 0)
                              * np.maximum(a - new, 0) / dt)
                p_dn = np.exp(-2 * np.maximum(a + pos, 0)
                              * np.maximum(a + new, 0) / dt)
            hit |= (np.abs(new) >= a) | (u < p_up + p_dn)
            pos = new
        freq = hit.mean()
        se = math.sqrt(freq * (1 - freq) / n)
        assert abs(freq - two_sided_max_tail(a)) <= 3 * se
