"""Monte Carlo evaluation of the block crossing functional.

For one environment draw the two building blocks are computed exactly:

    f = 1 - P[tau_{xk} <= k]   under the origin-conditioned environment, by DP;
    g = S(xk) / S(ck)          from the log-domain profile;

and the replica contributes (1 - f) / (1 - f (1 - g)), a probability in
[0, 1].  Environments are the only randomness: replica r draws its window
from stream (seed, r), chunks are batched through one vectorized pipeline,
and the reduction runs in replica order, so results are bitwise reproducible
for a fixed seed regardless of chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env_model import EnvironmentDistribution, ballistic_summary
from .errors import RwreError
from .rng import ENV_STREAM, stream

__all__ = ["ChiEstimate", "ChiSlopeResult", "SlopeUndefinedError",
           "chi_mc", "chi_slope", "chi_exact_small"]


class SlopeUndefinedError(RwreError):
    """A slope grid point is statistically consistent with zero."""


@dataclass(frozen=True)
class ChiEstimate:
    k: int
    x: float
    c: float
    mean: float
    stderr: float
    n_samples: int
    f: np.ndarray | None = None   # retained per-sample components, optional
    g: np.ndarray | None = None
    flushed_max: float = 0.0


@dataclass(frozen=True)
class ChiSlopeResult:
    slope: float
    intercept: float
    slope_stderr: float
    residuals: np.ndarray
    points: tuple  # ChiEstimate per grid k
    k_grid: tuple


def _chi_from_omegas(omegas: np.ndarray, xk: int, ck: int, k: int):
    """Exact per-row (integrand, p_hit, g) from a (B, ck-1) matrix of omega values.

    Row sites are 1..ck-1; the DP runs on the conditioned values over
    [1, xk-1] with absorption at xk and the origin pin at site 1.
    """
    B = omegas.shape[0]
    if omegas.shape[1] != ck - 1:
        raise ValueError("omega matrix must cover sites 1..ck-1")
    g_log = np.log1p(-omegas) - np.log(omegas)
    v = np.zeros((B, ck))
    np.cumsum(g_log[:, : ck - 1], axis=1, out=v[:, 1:])
    log_s = np.logaddexp.accumulate(v, axis=1)  # log_s[:, n-1] = log S(n)
    g_ratio = np.exp(log_s[:, xk - 1] - log_s[:, ck - 1])
    # conditioned values on sites 1..xk-1, cancellation-free form
    idx = np.arange(1, xk)
    hat = omegas[:, idx - 1] * (1.0 + np.exp(v[:, idx] - log_s[:, idx - 1]))
    hat[:, 0] = 1.0
    np.minimum(hat, 1.0, out=hat)
    p_hit, flushed = _dp_batch(hat, k)
    denom = g_ratio + p_hit * (1.0 - g_ratio)
    integrand = np.where(denom > 0.0, p_hit / np.where(denom > 0.0, denom, 1.0), 0.0)
    if integrand.min() < 0.0 or integrand.max() > 1.0 + 1e-12:
        raise ArithmeticError("crossing integrand left [0, 1]")
    return np.clip(integrand, 0.0, 1.0), p_hit, g_ratio, float(flushed.max(initial=0.0))


def _dp_batch(hat: np.ndarray, k: int, flush: float = 1e-300):
    """Vectorized absorption DP: rows are replicas, columns sites 1..xk-1."""
    B, width = hat.shape
    mass = np.zeros((B, width))
    mass[:, 0] = 1.0
    absorbed = np.zeros(B)
    flushed = np.zeros(B)
    for _ in range(k):
        right = mass * hat
        left = mass - right
        new = np.zeros_like(mass)
        new[:, 1:] = right[:, :-1]
        new[:, :-1] += left[:, 1:]
        absorbed += right[:, -1]
        small = (new < flush) & (new > 0.0)
        if small.any():
            flushed += np.where(small, new, 0.0).sum(axis=1)
            new[small] = 0.0
        mass = new
        total = mass.sum(axis=1) + absorbed + flushed
        if np.abs(total - 1.0).max() > 1e-12:
            raise ArithmeticError("batched DP mass conservation violated")
    return absorbed, flushed


def _sample_omega_rows(dist: EnvironmentDistribution, n_cols: int, seed: int,
                       replicas: range, antithetic: bool) -> np.ndarray:
    cdf = dist.cdf_thresholds()
    rows = np.empty((len(replicas), n_cols))
    prev_u = None
    for j, r in enumerate(replicas):
        if antithetic and r % 2 == 1 and prev_u is not None:
            u = 1.0 - prev_u
        else:
            u = stream(seed, r, namespace=ENV_STREAM).random(n_cols)
            prev_u = u
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), dist.omegas.size - 1)
        rows[j] = dist.omegas[idx]
    return rows


def chi_mc(p: EnvironmentDistribution, k: int, x: float, c: float,
           n_samples: int, seed: int, chunk: int = 2048,
           antithetic: bool = False, keep_components: bool = False,
           stream_offset: int = 0) -> ChiEstimate:
    """Monte Carlo mean of the crossing functional over environment draws.

    x >= 1 short-circuits to an exact zero (fast crossings over a window of
    at least k sites are treated as impossible by contract).  Requires a
    ballistic base law and c > x > 0.
    """
    if x >= 1.0:
        return ChiEstimate(k=k, x=x, c=c, mean=0.0, stderr=0.0, n_samples=n_samples)
    if not 0.0 < x < c:
        raise ValueError(f"need c > x > 0, got x={x}, c={c}")
    ballistic_summary(p)  # raises NonBallisticError when E rho >= 1
    xk = int(math.floor(x * k))
    ck = int(math.floor(c * k))
    if xk < 2:
        raise ValueError(f"floor(x k) = {xk} < 2: the crossing block is degenerate")
    vals = np.empty(n_samples)
    fs = np.empty(n_samples) if keep_components else None
    gs = np.empty(n_samples) if keep_components else None
    flushed_max = 0.0
    for base in range(0, n_samples, chunk):
        replicas = range(stream_offset + base, stream_offset + min(base + chunk, n_samples))
        omegas = _sample_omega_rows(p, ck - 1, seed, replicas, antithetic)
        integrand, p_hit, g_ratio, fl = _chi_from_omegas(omegas, xk, ck, k)
        sl = slice(base, base + len(replicas))
        vals[sl] = integrand
        if keep_components:
            fs[sl] = 1.0 - p_hit
            gs[sl] = g_ratio
        flushed_max = max(flushed_max, fl)
    if antithetic and n_samples % 2 == 0:
        pair_means = vals.reshape(-1, 2).mean(axis=1)
        stderr = float(pair_means.std(ddof=1) / math.sqrt(pair_means.size))
    else:
        stderr = float(vals.std(ddof=1) / math.sqrt(n_samples))
    return ChiEstimate(k=k, x=x, c=c, mean=float(vals.mean()), stderr=stderr,
                       n_samples=n_samples, f=fs, g=gs, flushed_max=flushed_max)


def chi_exact_small(p: EnvironmentDistribution, k: int, x: float, c: float) -> float:
    """Exact chi by enumerating every atom assignment on the window (oracle).

    Only feasible for n_atoms^(ck-1) up to ~1e6; used to pin the Monte Carlo
    estimator in tests.
    """
    if x >= 1.0:
        return 0.0
    xk = int(math.floor(x * k))
    ck = int(math.floor(c * k))
    n_sites = ck - 1
    n_atoms = p.omegas.size
    n_cfg = n_atoms ** n_sites
    if n_cfg > 1_500_000:
        raise ValueError(f"enumeration over {n_cfg} configurations is not small")
    digits = np.empty((n_cfg, n_sites), dtype=np.int64)
    idx = np.arange(n_cfg)
    for j in range(n_sites):
        digits[:, j] = (idx // (n_atoms ** j)) % n_atoms
    omegas = p.omegas[digits]
    logw = np.log(p.weights)[digits].sum(axis=1)
    total = 0.0
    chunk = 65536
    for a in range(0, n_cfg, chunk):
        b = min(a + chunk, n_cfg)
        integrand, _, _, _ = _chi_from_omegas(omegas[a:b], xk, ck, k)
        total += float(np.dot(np.exp(logw[a:b]), integrand))
    return total


def chi_slope(p: EnvironmentDistribution, x: float, c: float, k_grid,
              n_samples: int, seed: int, chunk: int = 2048) -> ChiSlopeResult:
    """Weighted least-squares slope of -log chi(k) against k.

    The slope is the finite-k proxy for the crossing rate at x.  Every grid
    estimate must be positive with relative stderr below 25%; otherwise the
    grid point is statistically consistent with zero and the slope is
    undefined (SlopeUndefinedError tells the caller to lower x or raise
    n_samples).
    """
    k_grid = tuple(int(k) for k in k_grid)
    if len(k_grid) < 3 or any(b <= a for a, b in zip(k_grid, k_grid[1:])):
        raise ValueError("k_grid must be increasing with at least 3 points")
    points = []
    for j, k in enumerate(k_grid):
        est = chi_mc(p, k, x, c, n_samples, seed, chunk=chunk,
                     stream_offset=j * n_samples)
        if est.mean <= 0.0 or est.stderr / est.mean > 0.25:
            raise SlopeUndefinedError(
                f"chi({k}, {x}, {c}) = {est.mean:.3g} +- {est.stderr:.3g} is consistent "
                "with zero; reduce x or increase n_samples")
        points.append(est)
    ks = np.array(k_grid, dtype=float)
    y = -np.log(np.array([e.mean for e in points]))
    sigma = np.array([e.stderr / e.mean for e in points])
    w = 1.0 / sigma ** 2
    kbar = np.sum(w * ks) / np.sum(w)
    ybar = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (ks - kbar) ** 2)
    slope = float(np.sum(w * (ks - kbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * kbar)
    residuals = y - (intercept + slope * ks)
    return ChiSlopeResult(slope=slope, intercept=intercept,
                          slope_stderr=float(1.0 / math.sqrt(sxx)),
                          residuals=residuals, points=tuple(points), k_grid=k_grid)
