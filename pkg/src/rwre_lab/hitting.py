"""Exact quenched hitting-time computations.

Three computational primitives:

* finite-horizon absorption probabilities P[tau_m <= k] by forward mass
  propagation (exact to float precision, with honest underflow accounting);
* per-site first-passage MGFs phi_i(lambda) = E_i[exp(lambda tau_{i+1})] for
  lambda <= 0, through the birth-death continued-fraction recursion
  phi_i = w_i e^l / (1 - (1-w_i) e^l phi_{i-1}), seeded exactly at the origin
  for origin-anchored conditioned environments and certified by a two-seed
  bracket elsewhere;
* time-truncated MGFs from exact first-passage time distributions.

On top of these sits the family of variational values

    sup_{lambda <= 0} { lambda - (1/k) sum_{i=J}^{xk-1} log phi_i(lambda) },

optimized by golden section on a bracket whose lower edge comes from the
optimizer bound exp(lambda*) >= kappa (1-x)/x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .conditioned import ConditionedEnvironment, Kind
from .env_model import Environment
from .errors import ContextError, CoverageError
from .search import golden_max

FLUSH_LEVEL = 1e-300


def _values_window(env_like, a: int, b: int) -> np.ndarray:
    """Transition probabilities over sites [a, b) from either environment type."""
    if isinstance(env_like, (ConditionedEnvironment, Environment)):
        return env_like.slice(a, b)
    raise TypeError(f"unsupported environment object: {type(env_like)!r}")


def _is_origin_hat(env_like) -> bool:
    return isinstance(env_like, ConditionedEnvironment) and env_like.kind is Kind.HAT


@dataclass(frozen=True)
class DpKernel:
    """Finite-horizon absorption summary: P[tau_target <= horizon] and bookkeeping."""

    target: int
    horizon: int
    start: int
    p_hit: float
    flushed: float          # total probability flushed to zero (absolute error budget)
    final_mass: np.ndarray  # unabsorbed mass over [floor, target) after `horizon` steps
    floor: int


def hit_prob_dp(env_like, start: int, m: int, k: int, detail: bool = False):
    """Exact P[tau_m <= k] for the walk started at ``start``.

    Origin-anchored conditioned environments have a hard floor at site 1
    (the transform pins site 1 to probability one); any other environment is
    propagated over [start - k, m), which the window must cover.  Mass below
    1e-300 is flushed to zero and accumulated into the reported error budget;
    conservation is asserted at every step.
    """
    if not start < m:
        raise ValueError(f"need start < m, got start={start}, m={m}")
    if k < 0:
        raise ValueError("horizon must be >= 0")
    floor = 1 if _is_origin_hat(env_like) else start - k
    if m - start > k:
        if detail:
            width = max(m - max(floor, env_like.lo), 1)
            mass = np.zeros(width)
            return DpKernel(target=m, horizon=k, start=start, p_hit=0.0,
                            flushed=0.0, final_mass=mass, floor=floor)
        return 0.0
    p = np.ascontiguousarray(_values_window(env_like, floor, m))
    width = m - floor
    mass = np.zeros(width)
    mass[start - floor] = 1.0
    absorbed = 0.0
    flushed = 0.0
    for _ in range(k):
        right = mass * p
        left = mass - right
        new = np.zeros(width)
        new[1:] = right[:-1]
        new[:-1] += left[1:]
        # left flux out of the floor site: structurally zero (probability-1 site
        # or unreachable within the horizon); anything else is a logic error.
        if left[0] > 0.0 and not _is_origin_hat(env_like):
            raise CoverageError(f"mass leaked below the DP floor {floor}")
        absorbed += right[-1]
        small = new < FLUSH_LEVEL
        if small.any():
            flushed += float(new[small].sum())
            new[small] = 0.0
        mass = new
        total = float(mass.sum()) + absorbed + flushed
        if abs(total - 1.0) > 1e-12:
            raise ArithmeticError(f"DP mass conservation violated: total={total!r}")
    if detail:
        return DpKernel(target=m, horizon=k, start=start, p_hit=float(absorbed),
                        flushed=flushed, final_mass=mass, floor=floor)
    return float(absorbed)


def hit_prob_enumerate(env_like, start: int, m: int, k: int) -> float:
    """Brute-force P[tau_m <= k] by summing over all +/-1 paths (oracle, k small)."""
    floor = 1 if _is_origin_hat(env_like) else start - k
    p = _values_window(env_like, floor, m)

    def go(site: int, steps_left: int) -> float:
        if site == m:
            return 1.0
        if steps_left == 0 or m - site > steps_left:
            return 0.0
        w = p[site - floor]
        out = w * go(site + 1, steps_left - 1)
        if 1.0 - w > 0.0:
            out += (1.0 - w) * go(site - 1, steps_left - 1)
        return out

    return go(start, k)


# ---------------------------------------------------------------------------
# first-passage MGFs
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _phi_chain(values, elam, phi0):
    """phi along a site chain: phi[j] for the j-th site given phi0 below it."""
    out = np.empty(values.size)
    prev = phi0
    for j in range(values.size):
        w = values[j]
        prev = w * elam / (1.0 - (1.0 - w) * elam * prev)
        if prev > 1.0:  # rounding guard: the MGF cannot exceed 1 for lambda <= 0
            prev = 1.0
        out[j] = prev
    return out


@dataclass(frozen=True)
class PhiResult:
    value: float
    log_value: float
    burn_in: int
    sensitivity: float  # gap between the two certification seeds


def phi_site(env_like, i: int, lam: float, burn_in: int = 64) -> PhiResult:
    """MGF of the passage time i -> i+1 at lambda <= 0.

    For an origin-anchored conditioned environment the recursion runs exactly
    from phi_1 = e^lambda (site 1 forces a right step).  Otherwise the chain
    is seeded at depth ``burn_in`` below i twice, with the bracketing seeds
    e^lambda and omega e^lambda; the burn-in doubles until the two agree to
    1e-9 or the window runs out (ContextError).
    """
    if lam > 0:
        raise ValueError("lambda must be <= 0")
    elam = math.exp(lam)
    if _is_origin_hat(env_like):
        env_like.require(1, i + 1, "phi_site")
        values = env_like.slice(1, i + 1)
        # phi_1 = e^lambda exactly; chain upward over sites 2..i.
        phi = _phi_chain(values[1:], elam, elam)[-1] if i > 1 else elam
        return PhiResult(value=float(phi), log_value=float(np.log(phi)),
                         burn_in=0, sensitivity=0.0)
    b_avail = i - env_like.lo
    if b_avail < 1:
        raise ContextError(f"phi_site at i={i}: no left context below the site")
    b = min(burn_in, b_avail)
    while True:
        values = _values_window(env_like, i - b, i + 1)
        hi = _phi_chain(values[1:], elam, elam)[-1] if values.size > 1 else elam
        lo = _phi_chain(values[1:], elam, values[0] * elam)[-1] if values.size > 1 \
            else values[0] * elam
        gap = abs(hi - lo)
        if gap < 1e-9:
            return PhiResult(value=float(hi), log_value=float(np.log(hi)),
                             burn_in=b, sensitivity=float(gap))
        if b >= b_avail:
            raise ContextError(
                f"phi_site at i={i}: the window (lo={env_like.lo}) is exhausted at "
                f"burn-in {b} with the two seeds still {gap:.2e} apart")
        b = min(2 * b, b_avail)


def certified_log_phi_chain(values: np.ndarray, lam: float, n_skip: int,
                            tol: float = 1e-9) -> np.ndarray | None:
    """log phi over values[n_skip:], certified by the two-seed bracket.

    ``values`` covers the burn-in sites followed by the sites of interest;
    returns None when the seeds still disagree beyond ``tol`` anywhere in the
    returned slice (caller extends the burn-in and retries).
    """
    elam = math.exp(lam)
    hi = _phi_chain(values[1:], elam, elam)
    lo = _phi_chain(values[1:], elam, values[0] * elam)
    hi_slice = hi[n_skip - 1:]
    lo_slice = lo[n_skip - 1:]
    if float(np.max(np.abs(hi_slice - lo_slice))) >= tol:
        return None
    return np.log(hi_slice)


@njit(cache=True, nogil=True)
def _passage_dist_one(values, start_idx, M):
    """First-passage time distribution from relative DP.

    values[d] is the right-step probability at depth d below the start
    (d = 0 is the start site); absorption is one step above the start.
    Returns p[t] for t = 1..M-1 (p[0] unused).
    """
    dmax = values.size - 1
    mass = np.zeros(dmax + 1)
    mass[0] = 1.0
    p_t = np.zeros(M)
    for t in range(1, M):
        new = np.zeros(dmax + 1)
        absorbed = 0.0
        for d in range(dmax + 1):
            mz = mass[d]
            if mz == 0.0:
                continue
            w = values[d]
            if d == 0:
                absorbed += mz * w
            else:
                new[d - 1] += mz * w
            if d < dmax:
                new[d + 1] += mz * (1.0 - w)
            # left flux at d == dmax is dropped: it cannot be absorbed by M-1
        p_t[t] = absorbed
        mass = new
    return p_t


def passage_time_dist(env_like, i: int, M: int) -> np.ndarray:
    """Exact P_i[tau_{i+1} = t] for t = 1..M-1, as an array indexed by t.

    For origin-anchored conditioned environments depth is capped at site 1;
    otherwise the window must reach down to i - (M - 1) (or its natural cap).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if _is_origin_hat(env_like):
        depth_cap = i - 1
    else:
        depth_cap = i - env_like.lo
        if depth_cap < M - 1:
            raise CoverageError(
                f"passage_time_dist at i={i}, M={M} needs sites down to {i - (M - 1)}")
    dmax = min(M - 1, depth_cap)
    sites = np.arange(i, i - dmax - 1, -1)
    values = np.ascontiguousarray(env_like.omega(sites).astype(float))
    return _passage_dist_one(values, 0, M)


def phi_site_truncated(env_like, i: int, lam: float, M: int) -> float:
    """phi_{i,M} = E_i[exp(lambda tau_{i+1}); tau_{i+1} < M], exact."""
    if lam > 0:
        raise ValueError("lambda must be <= 0")
    p_t = passage_time_dist(env_like, i, M)
    t = np.arange(M)
    return float(np.sum(p_t * np.exp(lam * t)))


def passage_tail(env_like, i: int, M: int) -> float:
    """P_i[tau_{i+1} >= M], exact from the same DP."""
    return float(max(0.0, 1.0 - passage_time_dist(env_like, i, M).sum()))


@dataclass(frozen=True)
class MgfTable:
    """Per-site phi values at a fixed lambda over a site range."""

    lam: float
    sites: np.ndarray
    phi: np.ndarray
    truncation: int | None = None
    burn_in: int = 0


# ---------------------------------------------------------------------------
# variational values sup_{lambda <= 0} { lambda - (1/k) sum log phi }
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IHatResult:
    value: float
    lam_star: float
    variant: str
    J: int
    x: float
    k: int
    M: int | None = None
    L: int | None = None
    burn_in: int = 0
    diagnostics: dict = field(default_factory=dict)


def lambda_bracket(kappa: float, x: float, margin: float = 5.0) -> float:
    """Lower search edge log(kappa (1-x)/x) - margin for the maximizer in lambda."""
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    return math.log(kappa * (1.0 - x) / x) - margin


def i_hat(env: Environment, x: float, k: int, J: int = 1,
          M: int | None = None, L: int | None = None,
          burn_in: int | None = None, lam_tol: float = 1e-10,
          kappa: float | None = None) -> IHatResult:
    """sup over lambda <= 0 of {lambda - (1/k) sum_{i=J}^{xk-1} log phi_i(lambda)}.

    Variant selection: plain conditioned environment when L is None, its
    depth-L truncation otherwise; exact MGFs when M is None, time-truncated
    ones otherwise.  The lambda search is golden section on
    [log(kappa(1-x)/x) - 5, 0], refined to ``lam_tol``, with concavity
    asserted on the sampled points; an argmax pinned to the lower edge raises
    BracketError rather than clamping.
    """
    from .conditioned import hat_l_transform, hat_transform
    from .potential import build_profile

    xk = int(math.floor(x * k))
    j_min = 1 if L is None else 0  # the origin-anchored transform starts at site 1
    if not j_min <= J < xk:
        raise ValueError(f"need {j_min} <= J < floor(xk) = {xk}, got J={J}")
    kappa = env.kappa if kappa is None else kappa
    variant = ("J" if L is None else "JL") + ("" if M is None else "M")

    if L is None:
        profile = build_profile(env, xk)
        cenv = hat_transform(profile, xk - 1)
        sites = np.arange(J, xk)
        if M is None:
            values = cenv.slice(1, xk)

            def neg_sum_log_phi(lam):
                elam = math.exp(lam)
                phi = _phi_chain(values[1:], elam, elam) if xk > 2 else np.empty(0)
                logphi = np.concatenate(([lam], np.log(phi)))  # site 1 first
                return float(np.sum(logphi[J - 1:]))
            used_burn = 0
        else:
            dists = [passage_time_dist(cenv, int(i), M) for i in sites]
            log_p = [np.log(np.maximum(d, 1e-320)) for d in dists]
            t_grid = np.arange(M)

            def neg_sum_log_phi(lam):
                tot = 0.0
                for lp in log_p:
                    m_ = np.max(lp + lam * t_grid)
                    tot += m_ + math.log(float(np.sum(np.exp(lp + lam * t_grid - m_))))
                return tot
            used_burn = 0
    else:
        b = burn_in if burn_in is not None else max(64, 2 * L)
        if M is None:
            def make_objective(b_):
                lo_site = J - b_
                cenvL = hat_l_transform(env, L, lo_site, xk - 1)
                values = cenvL.slice(lo_site, xk)

                def neg_sum_log_phi(lam):
                    out = certified_log_phi_chain(values, lam, b_)
                    if out is None:
                        raise ContextError("burn-in too short")
                    return float(np.sum(out))
                return neg_sum_log_phi
        else:
            def make_objective(b_):
                lo_site = J - (M - 1)
                cenvL = hat_l_transform(env, L, lo_site, xk - 1)
                sites = np.arange(J, xk)
                dists = [passage_time_dist(cenvL, int(i), M) for i in sites]
                log_p = [np.log(np.maximum(d, 1e-320)) for d in dists]
                t_grid = np.arange(M)

                def neg_sum_log_phi(lam):
                    tot = 0.0
                    for lp in log_p:
                        m_ = np.max(lp + lam * t_grid)
                        tot += m_ + math.log(float(np.sum(np.exp(lp + lam * t_grid - m_))))
                    return tot
                return neg_sum_log_phi
        while True:
            try:
                neg_sum_log_phi = make_objective(b)
                neg_sum_log_phi(lambda_bracket(kappa, x) / 2.0)  # probe certification
                break
            except (ContextError, CoverageError):
                if J - 2 * b < env.lo and M is None:
                    raise ContextError(
                        f"i_hat variant {variant}: burn-in doubling exhausted the window")
                if M is not None:
                    raise
                b *= 2
        used_burn = b

    def objective(lam):
        return lam - neg_sum_log_phi(lam) / k

    lam_lo = lambda_bracket(kappa, x)
    lam_star, value = golden_max(objective, lam_lo, 0.0, tol=lam_tol, check_concave=True)
    return IHatResult(value=float(value), lam_star=float(lam_star), variant=variant,
                      J=J, x=x, k=k, M=M, L=L, burn_in=used_burn)
