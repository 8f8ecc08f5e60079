import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwre_lab import (CoverageError, Environment, TruncationError, build_profile,
                      delta_eps, delta_eps_sandwich, hit_prob_ratio, local_log_s,
                      make_two_point, s_minus_inf, sample_environment,
                      standard_two_point, w_bound, w_value, xi_bar, xi_n)


def left_drift_env(seed=0, lo=-3000, length=6400):
    """A law with mean log rho > 0 so the left tail sum converges."""
    dist = make_two_point(1 / 3, 2 / 3, 0.8, 0.1)  # rho atoms {2 w.p. .8, 1/2 w.p. .2}
    return sample_environment(dist, lo, length, seed=seed)


class TestBuildProfile:
    def test_fair_env(self, fair_env):
        profile = build_profile(fair_env, 50)
        assert np.allclose(profile.v, 0.0)
        assert np.allclose(profile.log_s[1:], np.log(np.arange(1, 51)))

    def test_geometric_oracle(self):
        env = Environment.constant(1 / 3, 0, 40)  # rho = 2, S(n) = 2^n - 1
        profile = build_profile(env, 30)
        expect = np.log(np.exp2(np.arange(1, 31)) - 1.0)
        assert np.allclose(profile.log_s[1:], expect, rtol=1e-12)

    def test_two_term_sum(self, std_env):
        profile = build_profile(std_env, 10)
        rho1 = math.exp(std_env.log_rho_at(1))
        assert profile.log_s[2] == pytest.approx(math.log(1 + rho1), abs=1e-12)

    def test_window_too_short(self, std_dist):
        env = sample_environment(std_dist, 1, 5, seed=0)
        with pytest.raises(CoverageError):
            build_profile(env, 10)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_log_s_increasing(self, seed):
        env = sample_environment(standard_two_point(), 1, 120, seed=seed)
        profile = build_profile(env, 120)
        diffs = np.diff(profile.log_s[1:])
        assert np.all(diffs >= 0)
        # strict wherever the increment exp(V(n) - log S(n)) is resolvable in
        # doubles; deep in a drift stretch it falls below 1 ulp of log S
        resolvable = (profile.v[1:] - profile.log_s[1:-1]) > -34.0
        assert np.all(diffs[resolvable] > 0)

    def test_decomposition_identity(self, std_env):
        profile = build_profile(std_env, 300)
        rng = np.random.default_rng(7)
        for _ in range(200):
            m = int(rng.integers(1, 299))
            n = int(rng.integers(m + 1, 301))
            rhs = np.logaddexp(profile.log_s[m],
                               profile.v[m] + local_log_s(std_env, m, n - m))
            assert abs(profile.log_s[n] - rhs) < 1e-10


class TestHitProbRatio:
    def test_gamblers_ruin(self, fair_env):
        profile = build_profile(fair_env, 20)
        assert hit_prob_ratio(profile, 3, 10) == pytest.approx(0.3, abs=1e-12)

    def test_one_step(self, std_env):
        profile = build_profile(std_env, 5)
        rho1 = math.exp(std_env.log_rho_at(1))
        assert hit_prob_ratio(profile, 1, 2) == pytest.approx(1 / (1 + rho1), abs=1e-12)

    def test_ordering_violation(self, fair_env):
        profile = build_profile(fair_env, 20)
        with pytest.raises(ValueError):
            hit_prob_ratio(profile, 10, 3)

    def test_monotonicity(self, std_env):
        profile = build_profile(std_env, 40)
        vals_x = [hit_prob_ratio(profile, x, 30) for x in range(1, 30)]
        assert all(b > a for a, b in zip(vals_x, vals_x[1:]))
        vals_y = [hit_prob_ratio(profile, 5, y) for y in range(6, 40)]
        assert all(b < a for a, b in zip(vals_y, vals_y[1:]))


class TestW:
    def test_fair(self, fair_env):
        profile = build_profile(fair_env, 50)
        for n in (1, 2, 7, 20):
            assert w_value(profile, n) == pytest.approx(1.0 / n, abs=1e-12)

    def test_first_value_is_rho1(self, std_env):
        profile = build_profile(std_env, 5)
        assert w_value(profile, 1) == pytest.approx(math.exp(std_env.log_rho_at(1)))

    def test_ellipticity_bound(self, std_dist):
        for seed in range(50):
            env = sample_environment(std_dist, 1, 200, seed=seed)
            profile = build_profile(env, 200)
            for n in (1, 5, 50, 150):
                assert w_value(profile, n) <= w_bound(std_dist.kappa, n) + 1e-12


class TestLeftTail:
    def test_geometric_oracle(self, rho2_env):
        # terms 2^{-j} sum to exactly 1
        tail = s_minus_inf(rho2_env, rel_tol=1e-10)
        assert tail.converged
        assert tail.log_value == pytest.approx(0.0, abs=1e-9)

    def test_divergent_flag(self):
        env = Environment.constant(2 / 3, -2000, 2100)  # rho = 1/2, terms grow
        tail = s_minus_inf(env)
        assert not tail.converged

    def test_depth_doubling_stability(self):
        rel_tol = 1e-8
        env = left_drift_env(seed=11)
        a = s_minus_inf(env, rel_tol=rel_tol, max_depth=400)
        b = s_minus_inf(env, rel_tol=rel_tol, max_depth=800)
        assert a.converged and b.converged
        assert abs(math.exp(a.log_value - b.log_value) - 1.0) < 2 * rel_tol


class TestXi:
    def test_xi_bar_plugin_oracle(self, rho2_env):
        # rho = 2: W(i+1) = 2^{i+1}/(2^{i+1}-1), S(i) = 2^i - 1, S(-inf) = 1,
        # so xi_bar(i) = 2 / (2^{i+1} - 1)
        for i in (1, 3, 6):
            expect = 2.0 / (2 ** (i + 1) - 1)
            assert xi_bar(rho2_env, i) == pytest.approx(expect, rel=1e-8)

    def test_domination_by_xi_bar(self):
        # the truncated left tail underestimates S(-inf) and so understates
        # xi_bar by up to its relative tolerance; compare with that slack
        env = left_drift_env(seed=23)
        rng = np.random.default_rng(1)
        for _ in range(300):
            n = int(rng.integers(2, 80))
            i = int(rng.integers(1, n))
            bound = xi_bar(env, i, anchor=n - i, rel_tol=1e-12)
            assert xi_n(env, n, i) <= bound * (1 + 1e-9)

    def test_xi_bar_capped_by_c_kappa(self):
        env = left_drift_env(seed=5)
        for i in range(1, 40):
            assert xi_bar(env, i) <= env.c_kappa + 1e-12

    def test_divergent_propagates(self):
        env = Environment.constant(2 / 3, -500, 600)
        with pytest.raises(TruncationError):
            xi_bar(env, 3)
        # the infinite-tail limit degrades to W(i+1)
        profile = build_profile(env, 10)
        assert xi_bar(env, 3, divergent_ok=True) == pytest.approx(w_value(profile, 4))


class TestDeltaEps:
    def test_constant_environment_oracle(self):
        # rho constant < 1: both prefix maxima are single-block values, so
        # delta = 0 and Delta = -x * log(rho)
        env = Environment.constant(2 / 3, -10, 900)  # rho = 1/2
        delta, big = delta_eps(env, k=200, x=0.5, c=4.0, eps=0.05)
        assert delta == pytest.approx(0.0, abs=1e-12)
        assert big == pytest.approx(-0.5 * math.log(0.5), abs=1e-9)

    def test_divisibility_rejected(self, std_env):
        with pytest.raises(ValueError):
            delta_eps(std_env, k=200, x=0.5, c=4.0, eps=0.07)

    def test_degenerate_range_rejected(self, std_env):
        with pytest.raises(ValueError):
            delta_eps(std_env, k=200, x=0.5, c=0.5, eps=0.05)

    def test_sandwich_random(self, std_dist):
        for seed in range(100):
            env = sample_environment(std_dist, 0, 801, seed=seed)
            lo, val, hi = delta_eps_sandwich(env, k=200, x=0.5, c=4.0, eps=0.05)
            assert lo <= val <= hi
