import math

import numpy as np
import pytest

from rwre_lab import (NonBallisticError, SlopeUndefinedError, chi_exact_small,
                      chi_mc, chi_slope, make_two_point)


class TestChiMc:
    def test_short_circuit_above_one(self, std_dist):
        for x in (1.0, 1.2):
            est = chi_mc(std_dist, 50, x, 4.0, 100, seed=1)
            assert est.mean == 0.0 and est.stderr == 0.0

    def test_near_deterministic_drift(self):
        dist = make_two_point(0.9, 0.9, 1.0, 0.1)  # rho = 1/9, speed 0.8
        est = chi_mc(dist, 60, 0.5, 2.0, 200, seed=2)
        assert est.mean > 0.9

    def test_enumeration_oracle(self, std_dist):
        exact = chi_exact_small(std_dist, 8, 0.5, 2.0)
        est = chi_mc(std_dist, 8, 0.5, 2.0, 40_000, seed=3)
        assert abs(est.mean - exact) <= 4.0 * est.stderr

    def test_chunk_invariance(self, std_dist):
        a = chi_mc(std_dist, 40, 0.6, 4.0, 500, seed=4, chunk=64)
        b = chi_mc(std_dist, 40, 0.6, 4.0, 500, seed=4, chunk=500)
        assert a.mean == b.mean and a.stderr == b.stderr

    def test_component_bounds(self, std_dist):
        est = chi_mc(std_dist, 40, 0.6, 4.0, 500, seed=5, keep_components=True)
        assert 0.0 <= est.mean <= 1.0
        for arr in (est.f, est.g):
            assert np.all(arr >= -1e-15) and np.all(arr <= 1.0 + 1e-12)

    def test_antithetic_same_scale(self, std_dist):
        plain = chi_mc(std_dist, 30, 0.5, 4.0, 2000, seed=6)
        anti = chi_mc(std_dist, 30, 0.5, 4.0, 2000, seed=6, antithetic=True)
        assert abs(anti.mean - plain.mean) <= 5 * (plain.stderr + anti.stderr)

    def test_rejects_non_ballistic(self):
        dist = make_two_point(2 / 3, 1 / 3, 0.5, 0.1)
        with pytest.raises(NonBallisticError):
            chi_mc(dist, 40, 0.5, 4.0, 100, seed=7)

    def test_rejects_bad_geometry(self, std_dist):
        with pytest.raises(ValueError):
            chi_mc(std_dist, 40, 0.5, 0.4, 100, seed=8)


class TestChiSlope:
    def test_undefined_when_consistent_with_zero(self, std_dist):
        with pytest.raises(SlopeUndefinedError):
            chi_slope(std_dist, 0.9, 4.0, (100, 200, 300), 200, seed=9)

    def test_fit_sanity(self, std_dist):
        res = chi_slope(std_dist, 0.6, 4.0, (60, 90, 120, 150), 3000, seed=10)
        assert res.slope > 0
        assert res.slope_stderr > 0
        assert np.abs(res.residuals).max() < 1.0

    def test_grid_validation(self, std_dist):
        with pytest.raises(ValueError):
            chi_slope(std_dist, 0.6, 4.0, (100, 100, 200), 100, seed=11)
