"""Quenched walk simulation: trajectories, hitting records, increment statistics.

The stepping loop is a numba kernel fed with blocks of uniforms from a
counter-based stream, so runs are bit-reproducible for a fixed (seed, replica)
and fast enough for 1e7-step trajectories.  Summary mode keeps a (k+1)-slot
ring buffer instead of the step sequence, which is all the windowed-increment
maximum needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .env_model import Environment
from .errors import CoverageError
from .rng import walk_stream

_I64_MIN = np.iinfo(np.int64).min


class Mode(Enum):
    FULL = "full"
    SUMMARY = "summary"


@dataclass(frozen=True)
class Steps:
    """Stop after exactly n steps."""
    n: int


@dataclass(frozen=True)
class HitSite:
    """Stop at the first visit to site y."""
    y: int


@dataclass(frozen=True)
class Trajectory:
    start: int
    length: int
    seed: int | None
    steps: np.ndarray | None      # +/-1 as int8 (Full mode only)
    window: int | None = None     # k of the tracked sliding window (Summary mode)
    window_max: int | None = None  # max_t (X_{t+k} - X_t) over t >= 1, raw units
    final_position: int = 0

    def positions(self) -> np.ndarray:
        """X_0..X_n; requires Full mode."""
        if self.steps is None:
            raise ValueError("positions need a Full-mode trajectory")
        out = np.empty(self.length + 1, dtype=np.int64)
        out[0] = self.start
        np.cumsum(self.steps, out=out[1:])
        out[1:] += self.start
        return out


@dataclass(frozen=True)
class HittingRecord:
    targets: np.ndarray           # ascending sites, all > start
    times: np.ndarray             # int64 first-passage times; -1 encodes "never"
    backtrack_flag: bool = False

    def time(self, site: int) -> float:
        i = int(np.searchsorted(self.targets, site))
        if i >= self.targets.size or self.targets[i] != site:
            raise KeyError(f"site {site} was not tracked")
        t = self.times[i]
        return math.inf if t < 0 else float(t)


# state vector layout for the stepping kernel
_POS, _T, _WMAX, _FRONT, _BT, _EXIT, _CONS, _SKIND, _SARG, _K, _BTDEPTH, _BTLIM, _NEXTT, _DONE = range(14)


@njit(cache=True, nogil=True)
def _step_chunk(env_vals, env_lo, u, state, ring, targets, target_times, steps_out):
    pos = state[_POS]
    t = state[_T]
    k = state[_K]
    consumed = 0
    for j in range(u.size):
        if state[_SKIND] == 0 and t >= state[_SARG]:
            state[_DONE] = 1
            break
        if state[_SKIND] == 1 and pos == state[_SARG]:
            state[_DONE] = 1
            break
        idx = pos - env_lo
        if idx < 0 or idx >= env_vals.size:
            state[_EXIT] = 1
            break
        if u[j] < env_vals[idx]:
            pos += 1
            steps_out[j] = 1
        else:
            pos -= 1
            steps_out[j] = -1
        t += 1
        consumed += 1
        if k > 0:
            ring[t % (k + 1)] = pos
            if t >= k + 1:
                d = pos - ring[(t - k) % (k + 1)]
                if d > state[_WMAX]:
                    state[_WMAX] = d
        if pos > state[_FRONT]:
            state[_FRONT] = pos
        elif state[_BTDEPTH] > 0 and 1 <= state[_FRONT] <= state[_BTLIM]:
            if pos <= state[_FRONT] - state[_BTDEPTH]:
                state[_BT] = 1
        nt = state[_NEXTT]
        if nt < targets.size and pos == targets[nt]:
            target_times[nt] = t
            state[_NEXTT] = nt + 1
    state[_POS] = pos
    state[_T] = t
    state[_CONS] = consumed
    # re-check the stop condition so a stop on the last step of the block counts
    if state[_SKIND] == 0 and t >= state[_SARG]:
        state[_DONE] = 1
    if state[_SKIND] == 1 and pos == state[_SARG]:
        state[_DONE] = 1


def simulate_until(env: Environment, start: int, stop, seed: int,
                   mode: Mode = Mode.FULL, window: int | None = None,
                   targets=(), backtrack_depth: int = 0, backtrack_limit: int = 0,
                   stream_id: int = 0, block: int = 1 << 16):
    """Run one quenched walk until the stop rule fires.

    Summary mode drops the step sequence and keeps only the sliding-window
    maximum (``window`` = k) plus hitting times; Full mode retains the +/-1
    steps.  The walk erroring out of the environment window raises
    CoverageError with the offending site; the caller sizes the window.
    """
    if isinstance(stop, Steps):
        skind, sarg = 0, int(stop.n)
        if sarg < 0:
            raise ValueError("step budget must be >= 0")
    elif isinstance(stop, HitSite):
        skind, sarg = 1, int(stop.y)
    else:
        raise TypeError(f"unsupported stop rule: {stop!r}")

    targets = np.asarray(sorted(targets), dtype=np.int64)
    if targets.size and targets[0] <= start:
        raise ValueError("tracked targets must lie strictly to the right of the start site")
    target_times = np.full(targets.size, -1, dtype=np.int64)

    k = int(window) if window else 0
    ring = np.full(max(k + 1, 1), _I64_MIN, dtype=np.int64)
    if k > 0:
        ring[0] = start

    state = np.zeros(14, dtype=np.int64)
    state[_POS] = start
    state[_WMAX] = _I64_MIN
    state[_FRONT] = start
    state[_SKIND] = skind
    state[_SARG] = sarg
    state[_K] = k
    state[_BTDEPTH] = backtrack_depth
    state[_BTLIM] = backtrack_limit

    rng = walk_stream(seed, stream_id)
    chunks = [] if mode is Mode.FULL else None
    while not state[_DONE]:
        u = rng.random(block)
        steps_buf = np.empty(block, dtype=np.int8)
        _step_chunk(env.values, env.lo, u, state, ring, targets, target_times, steps_buf)
        if state[_EXIT]:
            raise CoverageError(
                f"walk exited the environment window at site {state[_POS]} "
                f"(window [{env.lo}, {env.hi}))")
        if chunks is not None and state[_CONS] > 0:
            chunks.append(steps_buf[:state[_CONS]].copy())

    length = int(state[_T])
    steps = None
    if mode is Mode.FULL:
        steps = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int8)
    wmax = None if k == 0 else (None if state[_WMAX] == _I64_MIN else int(state[_WMAX]))
    traj = Trajectory(start=start, length=length, seed=seed, steps=steps,
                      window=(k or None), window_max=wmax,
                      final_position=int(state[_POS]))
    record = HittingRecord(targets=targets, times=target_times,
                           backtrack_flag=bool(state[_BT]))
    return traj, record


def er_statistic(traj: Trajectory, k: int) -> float:
    """max over 1 <= t <= n-k of (X_{t+k} - X_t)/k, in O(n) time.

    Works from the stored steps in Full mode; Summary-mode trajectories carry
    the max for their tracked window and reject any other k.
    """
    if k < 1:
        raise ValueError("window k must be >= 1")
    if traj.length < k + 1:
        raise ValueError(f"trajectory of length {traj.length} too short for window {k}")
    if traj.steps is None:
        if traj.window != k:
            raise ValueError(f"summary trajectory tracked window {traj.window}, not {k}")
        return traj.window_max / k
    pos = traj.positions()
    diffs = pos[1 + k:] - pos[1:-k]
    return float(diffs.max()) / k


def backtrack_event(traj: Trajectory, hits: HittingRecord, n: int, a: int) -> bool:
    """Whether some site y in [1, n] was followed by a dip to y - a before y + 1.

    Scans the frontier (running maximum) of a Full trajectory: while the
    frontier sits at y, a position <= y - a realizes the event for that y.
    """
    if a < 1:
        raise ValueError("backtrack depth a must be >= 1")
    if traj.steps is None:
        return hits.backtrack_flag
    pos = traj.positions()
    frontier = np.maximum.accumulate(pos)
    mask = (frontier >= 1) & (frontier <= n) & (pos <= frontier - a)
    return bool(mask.any())


def local_time_counts(traj: Trajectory, upto: int | None = None):
    """Visit counts per site over X_0..X_upto (replay of the step sequence)."""
    pos = traj.positions()
    if upto is not None:
        pos = pos[: upto + 1]
    lo = int(pos.min())
    counts = np.bincount(pos - lo)
    return lo, counts


# ---------------------------------------------------------------------------
# batched first-passage races (Monte Carlo oracle for the S-ratio)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _race_chunk(env_vals, env_lo, lo_site, hi_site, pos, alive, hit_hi, u):
    for r in range(pos.size):
        if not alive[r]:
            continue
        p = pos[r]
        for j in range(u.shape[1]):
            if u[r, j] < env_vals[p - env_lo]:
                p += 1
            else:
                p -= 1
            if p == hi_site:
                hit_hi[r] = True
                alive[r] = False
                break
            if p == lo_site:
                alive[r] = False
                break
        pos[r] = p


def race_probability(env: Environment, start: int, lo_site: int, hi_site: int,
                     n_walks: int, seed: int, block: int = 512,
                     max_rounds: int = 10_000):
    """Fraction of walks from ``start`` that reach ``hi_site`` before ``lo_site``.

    Replica r consumes its own stream (seed, r); results are reproducible and
    independent of chunking.  Returns (p_hat, stderr).
    """
    if not lo_site < start < hi_site:
        raise ValueError("need lo_site < start < hi_site")
    env.require(lo_site + 1, hi_site, "race_probability")
    hits = 0
    chunk = 8192
    for base in range(0, n_walks, chunk):
        m = min(chunk, n_walks - base)
        rngs = [walk_stream(seed, base + r) for r in range(m)]
        pos = np.full(m, start, dtype=np.int64)
        alive = np.ones(m, dtype=np.bool_)
        hit_hi = np.zeros(m, dtype=np.bool_)
        rounds = 0
        while alive.any():
            rounds += 1
            if rounds > max_rounds:
                raise RuntimeError("race walks failed to absorb within the round budget")
            u = np.empty((m, block))
            for r in range(m):
                if alive[r]:
                    u[r] = rngs[r].random(block)
            _race_chunk(env.values, env.lo, lo_site, hi_site, pos, alive, hit_hi, u)
        hits += int(hit_hi.sum())
    p = hits / n_walks
    return p, math.sqrt(max(p * (1.0 - p), 1e-300) / n_walks)
