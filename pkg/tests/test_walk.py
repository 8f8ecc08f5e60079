import math

import numpy as np
import pytest

from rwre_lab import (CoverageError, Environment, HitSite, HittingRecord, Mode,
                      Steps, Trajectory, backtrack_event, er_statistic,
                      local_time_counts, race_probability, sample_environment,
                      simulate_until)


def manual_trajectory(steps, start=0):
    steps = np.asarray(steps, dtype=np.int8)
    return Trajectory(start=start, length=steps.size, seed=None, steps=steps,
                      final_position=start + int(steps.sum()))


class TestSimulateUntil:
    def test_zero_steps(self, std_env):
        traj, rec = simulate_until(std_env, 0, Steps(0), seed=1)
        assert traj.length == 0
        assert rec.targets.size == 0

    def test_determinism(self, std_env):
        a, _ = simulate_until(std_env, 0, Steps(5000), seed=9)
        b, _ = simulate_until(std_env, 0, Steps(5000), seed=9)
        assert np.array_equal(a.steps, b.steps)

    def test_hit_site_stop(self, std_env):
        traj, rec = simulate_until(std_env, 0, HitSite(40), seed=2, targets=[10, 40])
        assert traj.final_position == 40
        assert rec.time(40) == traj.length
        assert rec.time(10) <= rec.time(40)

    def test_window_exit_error(self):
        env = Environment.constant(0.9, -2, 6, kappa=0.1)
        with pytest.raises(CoverageError):
            simulate_until(env, 0, Steps(100), seed=3)

    def test_hitting_times_nondecreasing(self, std_env):
        _, rec = simulate_until(std_env, 0, HitSite(60), seed=4,
                                targets=list(range(5, 61, 5)))
        times = rec.times.astype(float)
        assert np.all(np.diff(times) >= 0)

    def test_local_time_replay(self, std_env):
        traj, _ = simulate_until(std_env, 0, Steps(2000), seed=5)
        lo, counts = local_time_counts(traj, upto=1500)
        pos = traj.positions()[:1501]
        for site in range(lo, lo + counts.size):
            assert counts[site - lo] == int(np.sum(pos == site))


class TestErStatistic:
    def test_monotone_right_path(self):
        traj = manual_trajectory([1] * 50)
        assert er_statistic(traj, 10) == 1.0

    def test_alternating_path_even_window(self):
        traj = manual_trajectory([1, -1] * 30)
        assert er_statistic(traj, 10) == 0.0

    def test_brute_force_oracle(self, std_env):
        traj, _ = simulate_until(std_env, 0, Steps(10 ** 4), seed=6)
        k = 20
        pos = traj.positions()
        brute = max(pos[t + k] - pos[t] for t in range(1, traj.length - k + 1)) / k
        assert er_statistic(traj, k) == brute

    def test_summary_matches_full(self, std_env):
        k = 25
        full, _ = simulate_until(std_env, 0, Steps(4000), seed=7)
        summ, _ = simulate_until(std_env, 0, Steps(4000), seed=7,
                                 mode=Mode.SUMMARY, window=k)
        assert er_statistic(summ, k) == er_statistic(full, k)

    def test_window_too_large(self):
        traj = manual_trajectory([1] * 10)
        with pytest.raises(ValueError):
            er_statistic(traj, 10)

    def test_range(self, std_env):
        traj, _ = simulate_until(std_env, 0, Steps(3000), seed=8)
        val = er_statistic(traj, 15)
        assert -1.0 <= val <= 1.0


class TestBacktrack:
    def test_monotone_path_false(self):
        traj = manual_trajectory([1] * 40)
        rec = HittingRecord(targets=np.array([], dtype=np.int64),
                            times=np.array([], dtype=np.int64))
        assert not backtrack_event(traj, rec, 30, 3)

    def test_constructed_dip_true(self):
        steps = [1, 1, 1] + [-1] * 3 + [1] * 10  # reach 3, fall back to 0
        traj = manual_trajectory(steps)
        rec = HittingRecord(targets=np.array([], dtype=np.int64),
                            times=np.array([], dtype=np.int64))
        assert backtrack_event(traj, rec, 10, 3)
        assert not backtrack_event(traj, rec, 10, 4)

    def test_frequency_monotone_in_depth(self, std_dist):
        # B(n, a) is nested in a, so with shared paths the frequency is
        # exactly nonincreasing
        env_seeds = range(40)
        freqs = []
        for a in (2, 4, 6):
            hits = 0
            for s in env_seeds:
                env = sample_environment(std_dist, -200, 800, seed=1000 + s)
                traj, rec = simulate_until(env, 0, HitSite(80), seed=s)
                hits += backtrack_event(traj, rec, 80, a)
            freqs.append(hits)
        assert freqs[0] >= freqs[1] >= freqs[2]

    def test_online_flag_matches_replay(self, std_dist):
        for s in range(20):
            env = sample_environment(std_dist, -300, 900, seed=77 + s)
            traj, rec = simulate_until(env, 0, HitSite(60), seed=s,
                                       backtrack_depth=5, backtrack_limit=60)
            assert rec.backtrack_flag == backtrack_event(traj, rec, 60, 5)


class TestRace:
    def test_fair_oracle(self):
        env = Environment.constant(0.5, -5, 30)
        p, se = race_probability(env, 3, 0, 10, 30_000, seed=11)
        assert abs(p - 0.3) <= 4 * math.sqrt(0.3 * 0.7 / 30_000)

    def test_determinism(self, std_env):
        a = race_probability(std_env, 4, 0, 12, 2000, seed=13)
        b = race_probability(std_env, 4, 0, 12, 2000, seed=13)
        assert a == b
