import math

import numpy as np
import pytest

from rwre_lab import (CoverageError, Environment, build_profile, hat_l_transform,
                      hat_transform, sample_environment, shat_shift_check)
from rwre_lab.conditioned import hat_l_from_origin_check


class TestHatTransform:
    def test_site_one_exact(self, std_env):
        profile = build_profile(std_env, 60)
        cenv = hat_transform(profile, 40)
        assert cenv.values[0] == 1.0

    def test_fair_walk_conditioned(self, fair_env):
        profile = build_profile(fair_env, 40)
        cenv = hat_transform(profile, 20)
        i = np.arange(1, 21)
        assert np.allclose(cenv.values, (i + 1) / (2 * i), atol=1e-14)

    def test_dominates_base(self, std_env):
        profile = build_profile(std_env, 200)
        cenv = hat_transform(profile, 150)
        base = std_env.omega(np.arange(1, 151))
        assert np.all(cenv.values >= base)

    def test_window_too_short(self, std_env):
        profile = build_profile(std_env, 10)
        with pytest.raises(CoverageError):
            hat_transform(profile, 10)


class TestHatLTransform:
    def test_depth_one_forces_one(self, std_env):
        cenv = hat_l_transform(std_env, 1, 5, 25)
        assert np.allclose(cenv.values, 1.0)

    def test_fair_depth_three(self, fair_env):
        cenv = hat_l_transform(fair_env, 3, 5, 9)
        assert np.allclose(cenv.values, 2.0 / 3.0, atol=1e-14)

    def test_strictly_decreasing_in_depth(self, std_dist):
        rng = np.random.default_rng(2)
        for trial in range(200):
            L = int(rng.integers(1, 10))
            i = int(rng.integers(1, 50))
            env = sample_environment(std_dist, i - L - 2, L + 60, seed=trial)
            a = hat_l_transform(env, L, i, i).values[0]
            b = hat_l_transform(env, L + 1, i, i).values[0]
            assert b < a

    def test_cross_formula_from_origin(self, std_dist):
        # the sliding-window values must match the single-profile difference
        # form; conditioning of the subtraction limits i - L here
        rng = np.random.default_rng(3)
        for trial in range(100):
            L = int(rng.integers(1, 8))
            i = int(rng.integers(L + 1, L + 20))
            env = sample_environment(std_dist, 1, i + 3, seed=1000 + trial)
            assert hat_l_from_origin_check(env, L, i) < 1e-10

    def test_dominates_hat_beyond_depth(self, std_env):
        profile = build_profile(std_env, 80)
        cenv = hat_transform(profile, 60)
        for L in (2, 4, 8):
            cenv_l = hat_l_transform(std_env, L, L + 1, 60)
            hat_slice = cenv.slice(L + 1, 61)
            assert np.all(cenv_l.values >= hat_slice - 1e-12)

    def test_limit_collapses_at_depth_equal_site(self, std_dist):
        for seed in range(30):
            i = 40
            env = sample_environment(std_dist, 1, i + 4, seed=seed)
            profile = build_profile(env, i + 2)
            hat_val = hat_transform(profile, i).values[i - 1]
            l_val = hat_l_transform(env, i, i, i).values[0]
            assert abs(hat_val - l_val) < 1e-8

    def test_insufficient_left_context(self, std_dist):
        env = sample_environment(std_dist, 0, 50, seed=4)
        with pytest.raises(CoverageError):
            hat_l_transform(env, 10, 5, 20)


class TestShiftIdentity:
    def test_unit_case_collapses(self, std_env):
        profile = build_profile(std_env, 10)
        assert shat_shift_check(profile, 1, 1) < 1e-12

    def test_fair_case(self, fair_env):
        profile = build_profile(fair_env, 20)
        assert shat_shift_check(profile, 5, 3) < 1e-9

    def test_random_triples(self, std_dist):
        rng = np.random.default_rng(5)
        for trial in range(300):
            a = int(rng.integers(1, 30))
            b = int(rng.integers(1, 30))
            env = sample_environment(std_dist, 1, a + b + 3, seed=trial + 17)
            profile = build_profile(env, a + b + 1)
            assert shat_shift_check(profile, a, b) < 1e-9
