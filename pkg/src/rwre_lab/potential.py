"""Potential and Lyapunov functionals of an environment window, in log domain.

With rho_i = (1 - omega_i) / omega_i and g_i = log rho_i, the potential is

    V(j) = g_1 + ... + g_j   (V(0) = 0; V(j) = -(g_{j+1} + ... + g_0) for j < 0)

and the Lyapunov function S(n) = sum_{i=0}^{n-1} exp(V(i)) for n >= 1.  Ratios
of S are exact exit probabilities, exp(V(n))/S(n) is the edge weight W(n), and
all arithmetic here stays in log units: V grows linearly on atypical
stretches, so exp(V) overflows natural-scale doubles almost immediately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env_model import Environment
from .errors import CoverageError, TruncationError

NEG_INF = -math.inf


@dataclass(frozen=True)
class PotentialProfile:
    """Prefix arrays of V and log S over [0, n_max], anchored at the origin.

    v[j] = V(j) for 0 <= j < n_max; log_s[n] = log S(n) for 1 <= n <= n_max
    (log_s[0] is the -inf sentinel for S(0) = 0).
    """

    env: Environment
    n_max: int
    v: np.ndarray
    log_s: np.ndarray

    def require_n(self, n: int, what: str = "profile lookup"):
        if not 1 <= n <= self.n_max:
            raise CoverageError(f"{what}: n={n} outside profile range [1, {self.n_max}]")


def build_profile(env: Environment, n_max: int) -> PotentialProfile:
    """Tabulate V and log S up to S(n_max) by streaming max-shifted accumulation.

    Needs env sites [1, n_max); v[j] uses rho_1..rho_j and log_s[n] is the
    running log-sum-exp of v[0..n-1].
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    env.require(1, n_max, "build_profile")
    v = np.empty(n_max)
    v[0] = 0.0
    if n_max > 1:
        np.cumsum(env.log_rho_slice(1, n_max), out=v[1:])
    log_s = np.empty(n_max + 1)
    log_s[0] = NEG_INF
    np.logaddexp.accumulate(v, out=log_s[1:])
    v.setflags(write=False)
    log_s.setflags(write=False)
    return PotentialProfile(env=env, n_max=n_max, v=v, log_s=log_s)


def shifted_profile(env: Environment, anchor: int, n_max: int) -> PotentialProfile:
    """Profile of the shifted window (theta^anchor omega), built from scratch."""
    if anchor == 0:
        return build_profile(env, n_max)
    env.require(anchor + 1, anchor + n_max, "shifted_profile")
    sub = Environment(lo=0, values=env.slice(anchor, anchor + n_max),
                      kappa=env.kappa, seed=env.seed)
    return build_profile(sub, n_max)


def local_log_s(env: Environment, anchor: int, n: int) -> float:
    """log S(n, theta^anchor omega) from a fresh local accumulation (n >= 1)."""
    env.require(anchor + 1, anchor + n, "local_log_s")
    if n == 1:
        return 0.0
    v = np.empty(n)
    v[0] = 0.0
    np.cumsum(env.log_rho_slice(anchor + 1, anchor + n), out=v[1:])
    m = float(v.max())
    return m + math.log(float(np.sum(np.exp(v - m))))


def hit_prob_ratio(profile: PotentialProfile, x: int, y: int) -> float:
    """Quenched probability, started at x, of reaching y before 0: S(x)/S(y)."""
    if not 0 < x < y:
        raise ValueError(f"need 0 < x < y, got x={x}, y={y}")
    profile.require_n(y, "hit_prob_ratio")
    return float(math.exp(profile.log_s[x] - profile.log_s[y]))


def w_value(profile: PotentialProfile, n: int) -> float:
    """W(n) = exp(V(n)) / S(n); the weight the walk leaks past site n."""
    profile.require_n(n, "w_value")
    if n >= profile.n_max:
        raise CoverageError(f"w_value needs v[{n}]; profile holds v up to {profile.n_max - 1}")
    return float(math.exp(profile.v[n] - profile.log_s[n]))


def log_w_value(profile: PotentialProfile, n: int) -> float:
    profile.require_n(n, "log_w_value")
    if n >= profile.n_max:
        raise CoverageError(f"log_w_value needs v[{n}]")
    return float(profile.v[n] - profile.log_s[n])


def w_bound(kappa: float, n: int) -> float:
    """Deterministic ellipticity bound on W(n): ((1-2k)/k) / (1 - (k/(1-k))^n)."""
    r = kappa / (1.0 - kappa)
    return ((1.0 - 2.0 * kappa) / kappa) / (1.0 - r ** n)


@dataclass(frozen=True)
class LeftTail:
    """Result of accumulating S(-inf) = sum_{j>=1} exp(V(-j)) from an anchor."""

    log_value: float
    converged: bool
    depth: int
    rel_tol: float


def s_minus_inf(env: Environment, anchor: int = 0, rel_tol: float = 1e-10,
                max_depth: int | None = None) -> LeftTail:
    """Accumulate the left tail sum S(-inf, theta^anchor omega) in log domain.

    Terms are exp(V(anchor - r) - V(anchor)) for r = 1, 2, ...; the sum
    converges exactly when the potential drifts to -inf going left (mean log
    rho > 0 under the law).  Accumulation stops once the optimistic geometric
    tail majorant  term * C_kappa / (C_kappa - 1)  drops below rel_tol times
    the partial sum; hitting max_depth (or the window edge) first returns
    converged=False and the caller must widen or accept divergence.
    """
    if max_depth is None:
        max_depth = anchor - env.lo
    max_depth = min(max_depth, anchor - env.lo)
    if max_depth < 1:
        raise CoverageError("no left context available for s_minus_inf")
    ck = env.c_kappa
    majorant = ck / (ck - 1.0) if ck > 1.0 else math.inf
    # V(anchor - r) - V(anchor) = -(g_{anchor-r+1} + ... + g_{anchor})
    g = env.log_rho_slice(anchor - max_depth + 1, anchor + 1)[::-1]
    terms = -np.cumsum(g)
    acc = NEG_INF
    for r in range(max_depth):
        acc = float(np.logaddexp(acc, terms[r]))
        if math.isfinite(majorant) and terms[r] + math.log(majorant) < math.log(rel_tol) + acc:
            return LeftTail(log_value=acc, converged=True, depth=r + 1, rel_tol=rel_tol)
    return LeftTail(log_value=acc, converged=False, depth=max_depth, rel_tol=rel_tol)


def xi_n(env: Environment, n: int, i: int) -> float:
    """xi_n(i) = W(i+1, theta^{n-i} omega) / (1 + S(i, theta^{n-i} omega) W(n-i, omega)).

    Needs 0 <= i < n and the window [1, n+2).
    """
    if not 0 <= i < n:
        raise ValueError(f"need 0 <= i < n, got i={i}, n={n}")
    shift = n - i
    # W(i+1) and S(i) in the shifted window, W(n-i) in the base window.
    log_w_shift = _local_log_w(env, shift, i + 1)
    log_s_shift = local_log_s(env, shift, i) if i >= 1 else NEG_INF
    log_w_base = _local_log_w(env, 0, shift)
    denom = np.logaddexp(0.0, log_s_shift + log_w_base)
    return float(math.exp(log_w_shift - denom))


def xi_bar(env: Environment, i: int, anchor: int = 0, rel_tol: float = 1e-10,
           max_depth: int | None = None, divergent_ok: bool = False) -> float:
    """xi_bar(i) = W(i+1) / (1 + S(i) / S(-inf)), all at theta^anchor omega.

    When the left tail fails to converge this raises TruncationError unless
    ``divergent_ok``, in which case the S(-inf) = inf limit (denominator 1)
    is used, i.e. the value degrades to W(i+1).
    """
    tail = s_minus_inf(env, anchor=anchor, rel_tol=rel_tol, max_depth=max_depth)
    log_w = _local_log_w(env, anchor, i + 1)
    if not tail.converged:
        if not divergent_ok:
            raise TruncationError(
                f"S(-inf) did not converge within depth {tail.depth}; "
                "widen the window or pass divergent_ok=True")
        return float(math.exp(log_w))
    log_s_i = local_log_s(env, anchor, i) if i >= 1 else NEG_INF
    denom = np.logaddexp(0.0, log_s_i - tail.log_value)
    return float(math.exp(log_w - denom))


def _local_log_w(env: Environment, anchor: int, n: int) -> float:
    """log W(n, theta^anchor omega) = V_theta(n) - log S(n, theta^anchor)."""
    env.require(anchor + 1, anchor + n + 1, "local W")
    g = env.log_rho_slice(anchor + 1, anchor + n + 1)
    v = np.concatenate(([0.0], np.cumsum(g)))  # V_theta(0..n)
    m = float(v[:-1].max())
    log_s = m + math.log(float(np.sum(np.exp(v[:-1] - m))))
    return float(v[-1] - log_s)


# ---------------------------------------------------------------------------
# epsilon-partitioning of [0, ck) and the Delta functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsPartition:
    """Even partition of [0, floor(xk)) and [floor(xk), floor(ck)) into eps-blocks."""

    eps: float
    x: float
    c: float
    k: int
    inner_means: np.ndarray   # per-block mean of log rho over I_1..I_{x/eps}
    outer_means: np.ndarray   # same over the blocks of [xk, ck)
    inner_sizes: np.ndarray
    outer_sizes: np.ndarray


def _even_blocks(n_items: int, n_blocks: int) -> np.ndarray:
    """Block sizes for the most even split of n_items into n_blocks (diff <= 1)."""
    if n_blocks < 1 or n_items < n_blocks:
        raise ValueError(f"cannot split {n_items} sites into {n_blocks} blocks")
    base, extra = divmod(n_items, n_blocks)
    return np.array([base + 1] * extra + [base] * (n_blocks - extra))


def eps_partition(env: Environment, k: int, x: float, c: float, eps: float) -> EpsPartition:
    """Block means of log rho over the eps-partition of [0, xk) and [xk, ck)."""
    if c <= x:
        raise ValueError(f"need c > x, got x={x}, c={c}")
    n_inner = x / eps
    if abs(n_inner - round(n_inner)) > 1e-9:
        raise ValueError(f"x/eps = {n_inner} must be an integer")
    n_inner = int(round(n_inner))
    n_outer = int(math.floor((c - x) / eps))
    if n_outer < 1:
        raise ValueError("outer range has no blocks; increase c - x or decrease eps")
    xk = int(math.floor(x * k))
    ck = int(math.floor(c * k))
    env.require(0, ck, "eps_partition")
    inner_sizes = _even_blocks(xk, n_inner)
    outer_sizes = _even_blocks(ck - xk, n_outer)
    g = env.log_rho_slice(0, ck)
    inner_edges = np.concatenate(([0], np.cumsum(inner_sizes)))
    outer_edges = xk + np.concatenate(([0], np.cumsum(outer_sizes)))
    inner_means = np.array([g[a:b].mean() for a, b in zip(inner_edges, inner_edges[1:])])
    outer_means = np.array([g[a:b].mean() for a, b in zip(outer_edges, outer_edges[1:])])
    return EpsPartition(eps=eps, x=x, c=c, k=k,
                        inner_means=inner_means, outer_means=outer_means,
                        inner_sizes=inner_sizes, outer_sizes=outer_sizes)


def delta_eps(env: Environment, k: int, x: float, c: float, eps: float):
    """(delta, Delta) of the eps-partition: prefix-max gap and its recentering.

    delta = max_j prefix-sums(outer means) - max_j prefix-sums(inner means);
    Delta = eps * delta - eps * sum(inner means).
    """
    part = eps_partition(env, k, x, c, eps)
    inner_prefix = np.cumsum(part.inner_means)
    outer_prefix = np.cumsum(part.outer_means)
    delta = float(outer_prefix.max() - inner_prefix.max())
    big_delta = float(eps * delta - eps * part.inner_means.sum())
    return delta, big_delta


def delta_eps_sandwich(env: Environment, k: int, x: float, c: float, eps: float):
    """Both sides of the two-sided eps-block bound on -(1/k) log(S(xk)/S(ck)).

    Returns (lower, value, upper); the contract is lower <= value <= upper,
    with slack terms (c+x) log C / (eps k) and log(xk)/k, log(ck)/k as in the
    block-partition estimate.
    """
    from .potential import build_profile  # self-import keeps signature tidy
    xk = int(math.floor(x * k))
    ck = int(math.floor(c * k))
    _, big_delta = delta_eps(env, k, x, c, eps)
    profile = build_profile(env, ck)
    value = -(profile.log_s[xk] - profile.log_s[ck]) / k
    log_c = math.log(env.c_kappa)
    slack = (c + x) * log_c / (eps * k)
    upper = max(big_delta + eps * log_c, 0.0) + slack + math.log(xk) / k
    lower = max(big_delta - eps * log_c, 0.0) - slack - math.log(ck) / k
    return lower, float(value), upper
