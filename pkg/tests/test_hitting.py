import math

import numpy as np
import pytest

from rwre_lab import (BracketError, ContextError, Environment, build_profile,
                      hat_l_transform, hat_transform, hit_prob_dp,
                      hit_prob_enumerate, i_hat, passage_tail, passage_time_dist,
                      phi_site, phi_site_truncated, sample_environment)
from rwre_lab.search import golden_max


@pytest.fixture(scope="module")
def cenv(std_dist):
    env = sample_environment(std_dist, 1, 200, seed=31)
    return hat_transform(build_profile(env, 160), 159)


class TestHitProbDp:
    def test_pinned_first_step(self, cenv):
        assert hit_prob_dp(cenv, 1, 2, 1) == 1.0

    def test_unreachable_distance(self, cenv):
        assert hit_prob_dp(cenv, 1, 10, 5) == 0.0

    def test_matches_enumeration(self, std_dist):
        for seed in range(10):
            env = sample_environment(std_dist, 1, 9, seed=seed)
            c = hat_transform(build_profile(env, 8), 7)
            for m in range(2, 7):
                for k in range(1, 13):
                    assert hit_prob_dp(c, 1, m, k) == pytest.approx(
                        hit_prob_enumerate(c, 1, m, k), abs=1e-14)

    def test_nondecreasing_in_horizon(self, cenv):
        vals = [hit_prob_dp(cenv, 1, 20, k) for k in range(19, 60)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_mass_accounting(self, cenv):
        kernel = hit_prob_dp(cenv, 1, 30, 50, detail=True)
        total = kernel.p_hit + kernel.final_mass.sum() + kernel.flushed
        assert total == pytest.approx(1.0, abs=1e-12)


class TestPhiSite:
    def test_probability_one_site(self):
        env = Environment.constant(0.9, -200, 400, kappa=0.1)
        cenv = hat_l_transform(env, 1, 1, 20)  # depth-1 values are exactly 1
        r = phi_site(cenv, 10, -0.4, burn_in=16)
        assert r.value == pytest.approx(math.exp(-0.4), abs=1e-12)

    def test_hat_at_lambda_zero(self, cenv):
        for i in (2, 10, 40):
            assert phi_site(cenv, i, 0.0).value == pytest.approx(1.0, abs=1e-12)

    def test_homogeneous_closed_form(self):
        p0, lam = 0.7, -0.3
        env = Environment.constant(p0, -3000, 4000)
        closed = (1 - math.sqrt(1 - 4 * p0 * (1 - p0) * math.exp(2 * lam))) \
            / (2 * (1 - p0) * math.exp(lam))
        r = phi_site(env, 10, lam, burn_in=64)
        assert r.value == pytest.approx(closed, abs=1e-12)

    def test_context_too_short(self):
        # fair environment at lambda = 0 never contracts: the two seeds stay apart
        env = Environment.constant(0.5, -40, 80)
        with pytest.raises(ContextError):
            phi_site(env, 10, 0.0, burn_in=16)

    def test_nonincreasing_in_abs_lambda(self, cenv):
        vals = [phi_site(cenv, 15, lam).value for lam in (0.0, -0.2, -0.5, -1.0, -2.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestPhiTruncated:
    def test_one_step_only(self, cenv):
        lam = -0.2
        assert phi_site_truncated(cenv, 7, lam, 2) == pytest.approx(
            float(cenv.omega(7)) * math.exp(lam), abs=1e-14)

    def test_lambda_zero_is_cdf(self, cenv):
        dist = passage_time_dist(cenv, 9, 30)
        assert phi_site_truncated(cenv, 9, 0.0, 30) == pytest.approx(
            float(dist.sum()), abs=1e-14)

    def test_gap_below_tail(self, cenv):
        lam = -0.2
        full = phi_site(cenv, 7, lam).value
        for M in (4, 8, 32, 128):
            vm = phi_site_truncated(cenv, 7, lam, M)
            assert vm <= full + 1e-15
            assert full - vm <= passage_tail(cenv, 7, M) + 1e-15

    def test_monotone_in_cutoff(self, cenv):
        vals = [phi_site_truncated(cenv, 11, -0.3, M) for M in (2, 4, 8, 16, 64)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestIHat:
    def test_single_deterministic_step(self):
        env = Environment.constant(0.9, 0, 40, kappa=0.1)
        k = 50
        res = i_hat(env, 2.0 / k + 1e-9, k, J=1)
        assert res.value == pytest.approx(0.0, abs=1e-9)
        assert res.lam_star == pytest.approx(0.0, abs=1e-8)

    def test_truncated_dominates_full(self, std_dist):
        for seed in range(5):
            env = sample_environment(std_dist, 1, 70, seed=seed)
            full = i_hat(env, 0.6, 100, J=1)
            trunc = i_hat(env, 0.6, 100, J=1, M=40)
            assert trunc.value >= full.value - 1e-9

    def test_hat_dominates_depth_truncation(self, std_dist):
        for seed in range(5):
            env = sample_environment(std_dist, -4200, 4400, seed=seed)
            r_hat = i_hat(env, 0.6, 100, J=8)
            r_l = i_hat(env, 0.6, 100, J=8, L=4)
            assert r_hat.value >= r_l.value - 1e-9

    def test_start_shift_bound(self, std_dist):
        x, k, L, J = 0.6, 100, 4, 8
        cap = (J / k) * math.log(x / (std_dist.kappa ** 2 * (1 - x)))
        for seed in range(5):
            env = sample_environment(std_dist, -4200, 4400, seed=seed)
            r_j = i_hat(env, x, k, J=J, L=L)
            r_0 = i_hat(env, x, k, J=0, L=L)
            assert abs(r_j.value - r_0.value) <= cap + 1e-9

    def test_chebyshev_direction(self, std_dist):
        env = sample_environment(std_dist, 1, 200, seed=3)
        x, k = 0.6, 200
        xk = int(x * k)
        c = hat_transform(build_profile(env, xk), xk - 1)
        p = hit_prob_dp(c, 1, xk, k)
        assert -math.log(p) / k >= i_hat(env, x, k, J=1).value - 1e-9


class TestGoldenSearch:
    def test_edge_guard_raises(self):
        with pytest.raises(BracketError):
            golden_max(lambda t: -t, 0.0, 1.0)  # max at the lower edge

    def test_boundary_sup_at_zero(self):
        x, y = golden_max(lambda t: t, -1.0, 0.0)
        assert x == 0.0 and y == 0.0

    def test_interior_quadratic(self):
        x, y = golden_max(lambda t: -(t - 0.3) ** 2, -1.0, 1.0, tol=1e-12)
        assert x == pytest.approx(0.3, abs=1e-9)
