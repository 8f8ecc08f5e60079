"""Randomized invariant battery.

Every check here is a theorem-backed identity, inequality, or oracle
comparison evaluated on seeded random environments.  The same functions back
the unit tests (small n), the `selftest` harness subcommand, and the
acceptance suite (spec-scale n); scale knobs are arguments, tolerances are
fixed.  A handful of checks accept a ``corrupt`` hook so the negative
controls can prove the battery actually bites.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import potential as pot
from .chi import chi_mc
from .conditioned import hat_l_transform, hat_transform
from .env_model import (Environment, EnvironmentDistribution, ballistic_summary,
                        log_mgf_rho, sample_environment, standard_two_point)
from .hitting import hit_prob_dp, hit_prob_enumerate, i_hat, passage_tail
from .rates import i_f, i_m, log_rho_law, min_ratio_s
from .rng import stream
from .walk import HitSite, Mode, Steps, race_probability, simulate_until


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    violations: int
    n_checks: int
    detail: str
    seconds: float


def _finish(name, violations, n_checks, detail, t0) -> CheckResult:
    return CheckResult(name=name, passed=violations == 0, violations=violations,
                       n_checks=n_checks, detail=detail, seconds=time.perf_counter() - t0)


def random_ballistic_dist(rng, kappa: float = 0.1, n_atoms: int = 2,
                          require_finite_s: bool = True) -> EnvironmentDistribution:
    """A random finite-support law with E rho < 1 (and a rho-atom above 1)."""
    for _ in range(10_000):
        omegas = rng.uniform(kappa, 1.0 - kappa, size=n_atoms)
        weights = rng.dirichlet(np.ones(n_atoms))
        dist = EnvironmentDistribution(np.sort(omegas)[::-1], weights, kappa)
        if dist.mean_rho >= 0.98:
            continue
        if require_finite_s and not np.any(dist.rho_atoms > 1.0):
            continue
        return dist
    raise RuntimeError("failed to draw a ballistic law")


# ---------------------------------------------------------------------------
# exact identities
# ---------------------------------------------------------------------------

def check_decomposition(seed=0, n_env=1000, n_max=300, tol=1e-9, corrupt=0.0):
    """S(n) = S(m) + e^{V(m)} S(n-m, shifted), with the shifted side rebuilt."""
    t0 = time.perf_counter()
    rng = stream(seed, 1)
    dist = standard_two_point()
    worst = 0.0
    violations = 0
    for e in range(n_env):
        env = sample_environment(dist, 1, n_max, seed + 17 * e)
        profile = pot.build_profile(env, n_max)
        m = int(rng.integers(1, n_max - 1))
        n = int(rng.integers(m + 1, n_max + 1))
        rhs = np.logaddexp(profile.log_s[m],
                           profile.v[m] + pot.local_log_s(env, m, n - m))
        resid = abs(float(profile.log_s[n] + corrupt - rhs))
        worst = max(worst, resid)
        if resid >= tol:
            violations += 1
    return _finish("decomposition-identity", violations, n_env,
                   f"worst residual {worst:.3e} (tol {tol:g})", t0)


def check_shift_identity(seed=0, n_env=1000, tol=1e-9):
    """Closed form for the conditioned-environment Lyapunov sum after a shift."""
    from .conditioned import shat_shift_check
    t0 = time.perf_counter()
    rng = stream(seed, 2)
    dist = standard_two_point()
    worst = 0.0
    violations = 0
    for e in range(n_env):
        a = int(rng.integers(1, 40))
        b = int(rng.integers(1, 40))
        env = sample_environment(dist, 1, a + b + 2, seed + 31 * e + 1)
        profile = pot.build_profile(env, a + b + 1)
        resid = shat_shift_check(profile, a, b)
        worst = max(worst, resid)
        if resid >= tol:
            violations += 1
    return _finish("shift-identity", violations, n_env,
                   f"worst residual {worst:.3e} (tol {tol:g})", t0)


def check_w_recursion(seed=0, n_env=1000, n_max=200, tol=1e-10, low_precision=False):
    """1/W(n) = (1/rho_n)(1 + 1/W(n-1)) to relative tol."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    worst = 0.0
    violations = 0
    for e in range(n_env):
        env = sample_environment(dist, 1, n_max + 1, seed + 13 * e + 2)
        profile = pot.build_profile(env, n_max + 1)
        log_w = profile.v[1:n_max + 1] - profile.log_s[1:n_max + 1]
        if low_precision:
            log_w = log_w.astype(np.float32).astype(np.float64)
        inv_w = np.exp(-log_w)
        rho = np.exp(env.log_rho_at(np.arange(2, n_max + 1)))
        lhs = inv_w[1:]
        rhs = (1.0 + inv_w[:-1]) / rho
        rel = np.abs(lhs - rhs) / np.abs(lhs)
        worst = max(worst, float(rel.max()))
        violations += int(np.sum(rel >= tol) > 0)
    return _finish("w-recursion", violations, n_env,
                   f"worst relative residual {worst:.3e} (tol {tol:g})", t0)


def check_eqs_sandwich(seed=0, n_env=1000, n_max=300):
    """max V <= log S(n) <= log n + max V at every n, exactly as stated."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    violations = 0
    for e in range(n_env):
        env = sample_environment(dist, 1, n_max, seed + 7 * e + 3)
        profile = pot.build_profile(env, n_max)
        run_max = np.maximum.accumulate(profile.v)
        n = np.arange(1, n_max + 1)
        lo_ok = run_max <= profile.log_s[1:] + 1e-12
        hi_ok = profile.log_s[1:] <= np.log(n) + run_max + 1e-12
        if not (lo_ok.all() and hi_ok.all()):
            violations += 1
    return _finish("lyapunov-sandwich", violations, n_env, "two-sided bound at each n", t0)


def check_hat_site_one(seed=0, n_env=1000, n_max=50):
    t0 = time.perf_counter()
    dist = standard_two_point()
    violations = 0
    for e in range(n_env):
        env = sample_environment(dist, 1, n_max, seed + 3 * e + 4)
        profile = pot.build_profile(env, n_max)
        cenv = hat_transform(profile, n_max - 1)
        if cenv.values[0] != 1.0:
            violations += 1
    return _finish("conditioned-site-one", violations, n_env, "value pinned to 1.0", t0)


def check_w_bound(seed=0, n_env=10_000, n_max=1000, chunk=500):
    """Ellipticity bound on W(n) for every n <= n_max."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    kappa = dist.kappa
    bound = pot.w_bound(kappa, np.arange(1, n_max))  # vectorized over n
    violations = 0
    worst_margin = math.inf
    for base in range(0, n_env, chunk):
        m = min(chunk, n_env - base)
        rows = np.vstack([
            sample_environment(dist, 1, n_max, seed + 5 * (base + j) + 5).log_rho
            for j in range(m)])
        v = np.zeros((m, n_max))
        np.cumsum(rows[:, : n_max - 1], axis=1, out=v[:, 1:])
        log_s = np.logaddexp.accumulate(v, axis=1)
        w = np.exp(v[:, 1:] - log_s[:, :-1])
        margin = bound[None, :] - w
        worst_margin = min(worst_margin, float(margin.min()))
        violations += int(np.sum(margin < 0))
    return _finish("w-ellipticity-bound", violations, n_env * (n_max - 1),
                   f"smallest margin {worst_margin:.3e}", t0)


def check_eps_sandwich(seed=0, n_env=1000, k=200, x=0.5, c=4.0, eps=0.05):
    """Two-sided block-partition bound on the log S ratio."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    ck = int(math.floor(c * k))
    violations = 0
    worst = -math.inf
    for e in range(n_env):
        env = sample_environment(dist, 0, ck + 1, seed + 11 * e + 6)
        lo, val, hi = pot.delta_eps_sandwich(env, k, x, c, eps)
        gap = max(lo - val, val - hi)
        worst = max(worst, gap)
        if gap > 0:
            violations += 1
    return _finish("eps-block-sandwich", violations, n_env,
                   f"worst overshoot {worst:.3e} (negative = margin)", t0)


# ---------------------------------------------------------------------------
# conditioned environment inequalities
# ---------------------------------------------------------------------------

def check_drift_inequality(seed=0, n_sites=1_000_000, L=8):
    """Ergodic mean of log rho under the conditioned environment sits below
    -|mean log rho| of the base, with block-resampled error bars."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    env = sample_environment(dist, 1, n_sites + 2, seed + 7)
    profile = pot.build_profile(env, n_sites + 2)
    idx = np.arange(L + 1, n_sites + 1)
    hat = env.omega(idx) * (1.0 + np.exp(profile.v[idx] - profile.log_s[idx]))
    np.minimum(hat, 1.0, out=hat)
    log_rho_hat = np.log1p(-np.minimum(hat, 1.0 - 1e-16)) - np.log(hat)
    base_mean = float(env.log_rho_at(idx).mean())
    block = 100
    nb = log_rho_hat.size // block
    bm = log_rho_hat[: nb * block].reshape(nb, block).mean(axis=1)
    margin = 5.0 * float(bm.std(ddof=1)) / math.sqrt(nb)
    lhs = float(log_rho_hat.mean())
    rhs = -abs(base_mean) + margin
    ok = lhs <= rhs
    # depth-L truncation drifts at least as slowly as the full transform
    cenv_l = hat_l_transform(env, L, L + 1, min(n_sites, 20_000))
    lhs_l = float(np.log1p(-np.minimum(cenv_l.values, 1 - 1e-16)).mean()
                  - np.log(cenv_l.values).mean())
    ok_l = lhs_l <= lhs + 5e-3 + margin
    violations = int(not ok) + int(not ok_l)
    return _finish("conditioned-drift", violations, 2,
                   f"hat mean {lhs:.5f} <= {rhs:.5f}; depth-L mean {lhs_l:.5f}", t0)


def check_hat_l_monotone(seed=0, n_checks=1000, l_max=12):
    """Depth-(L+1) values sit strictly below depth-L values at every site."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    rng = stream(seed, 3)
    violations = 0
    worst = math.inf
    for e in range(n_checks):
        L = int(rng.integers(1, l_max))
        i = int(rng.integers(1, 60))
        env = sample_environment(dist, i - L - 2, L + 64, seed + 19 * e + 8)
        a = hat_l_transform(env, L, i, i).values[0]
        b = hat_l_transform(env, L + 1, i, i).values[0]
        worst = min(worst, a - b)
        if not b < a:
            violations += 1
    return _finish("truncation-monotone-in-depth", violations, n_checks,
                   f"smallest gap {worst:.3e}", t0)


def check_hat_l_limit(seed=0, n_checks=200, i_site=60, tol=1e-8):
    """At depth L >= i the truncated transform collapses onto the origin one."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    violations = 0
    worst = 0.0
    for e in range(n_checks):
        env = sample_environment(dist, 1, i_site + 3, seed + 41 * e + 9)
        profile = pot.build_profile(env, i_site + 2)
        hat_val = float(hat_transform(profile, i_site).values[i_site - 1])
        l_val = float(hat_l_transform(env, i_site, i_site, i_site).values[0])
        gap = abs(hat_val - l_val)
        worst = max(worst, gap)
        if gap >= tol:
            violations += 1
    return _finish("truncation-limit-consistency", violations, n_checks,
                   f"worst |hatL - hat| = {worst:.3e} at L = i = {i_site}", t0)


def check_dp_domination(seed=0, n_checks=60, m=24, k=40, l_max=3):
    """Pointwise-larger transition probabilities give larger DP hit mass."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    rng = stream(seed, 4)
    violations = 0
    n_run = 0
    for e in range(n_checks):
        # deeper truncations rarely dominate pointwise below L, so weight L = 1
        L = 1 if e % 2 == 0 else int(rng.integers(1, l_max + 1))
        env = sample_environment(dist, -k - L - 2, m + k + L + 4, seed + 23 * e + 10)
        profile = pot.build_profile(env, m + 1)
        cenv = hat_transform(profile, m - 1)
        cenv_l = hat_l_transform(env, L, 1 - k - 1, m - 1)
        # guard: the coupling argument needs pointwise domination on [1, m-1]
        if np.any(cenv_l.slice(1, m) < cenv.slice(1, m) - 1e-12):
            continue
        n_run += 1
        p_hat = hit_prob_dp(cenv, 1, m, k)
        p_hat_l = hit_prob_dp(cenv_l, 1, m, k)
        if p_hat_l < p_hat - 1e-12:
            violations += 1
    return _finish("dp-stochastic-domination", violations, n_run,
                   f"{n_run} instances passed the pointwise guard", t0)


# ---------------------------------------------------------------------------
# hitting-kernel inequalities
# ---------------------------------------------------------------------------

def check_chebyshev_bound(seed=0, n_env=100, tol=1e-9):
    """-(1/k) log P[tau_{xk} <= k] >= the variational value, per environment."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    rng = stream(seed, 5)
    violations = 0
    worst = math.inf
    for e in range(n_env):
        x = float(rng.uniform(0.3, 0.7))
        k = int(rng.integers(100, 401))
        xk = int(math.floor(x * k))
        env = sample_environment(dist, 1, xk + 2, seed + 29 * e + 11)
        profile = pot.build_profile(env, xk)
        cenv = hat_transform(profile, xk - 1)
        p = hit_prob_dp(cenv, 1, xk, k)
        lhs = math.inf if p == 0.0 else -math.log(p) / k
        r = i_hat(env, x, k, J=1)
        worst = min(worst, lhs - r.value)
        if lhs < r.value - tol:
            violations += 1
    return _finish("hitting-chebyshev-bound", violations, n_env,
                   f"smallest slack {worst:.3e}", t0)


def check_truncation_gap(seed=0, n_env=30, x=0.6, k=100, M=40, J=1):
    """0 <= time-truncated value minus the full value <= computable-constant tail sum."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    violations = 0
    worst = -math.inf
    for e in range(n_env):
        xk = int(math.floor(x * k))
        env = sample_environment(dist, 1, xk + 2, seed + 37 * e + 12)
        r_full = i_hat(env, x, k, J=J)
        r_m = i_hat(env, x, k, J=J, M=M)
        gap = r_m.value - r_full.value
        profile = pot.build_profile(env, xk)
        cenv = hat_transform(profile, xk - 1)
        tails = sum(passage_tail(cenv, int(i), M) for i in range(J, xk))
        cap = math.exp(r_m.lam_star * (M - 1)) / dist.kappa * tails / k
        bad = (gap < -1e-9) or (gap > cap + 1e-9)
        worst = max(worst, gap - cap)
        violations += int(bad)
    return _finish("time-truncation-gap", violations, n_env,
                   f"worst (gap - cap) = {worst:.3e}; gap must sit in [0, cap]", t0)


def check_start_shift(seed=0, n_env=30, x=0.6, k=100, L=4, J=8):
    """Dropping the first J sites moves the depth-L value by at most
    (J/k) log(x / (kappa^2 (1-x))); and the untruncated value dominates."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    violations = 0
    worst = -math.inf
    cap = (J / k) * math.log(x / (dist.kappa ** 2 * (1.0 - x)))
    for e in range(n_env):
        xk = int(math.floor(x * k))
        env = sample_environment(dist, -4096 - L, xk + 4200 + L, seed + 43 * e + 13)
        r_j = i_hat(env, x, k, J=J, L=L)
        r_0 = i_hat(env, x, k, J=0, L=L)
        gap = abs(r_j.value - r_0.value)
        r_hat = i_hat(env, x, k, J=J)
        bad = (gap > cap + 1e-9) or (r_hat.value < r_j.value - 1e-9)
        worst = max(worst, gap - cap)
        violations += int(bad)
    return _finish("start-shift-bound", violations, n_env,
                   f"worst (gap - cap) = {worst:.3e}; cap {cap:.4f}", t0)


def check_passage_tail_bound(seed=0, n_env=100, x=0.6, k=200, a=2):
    """Per-site tail sum against the two-term bound with depth a log M."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    kappa = dist.kappa
    c_k = (1.0 - kappa) / kappa
    violations = 0
    detail = []
    for m_log in (2, 3):  # M = e^2, e^3 so that a log M = 4, 6 is an integer
        m_real = math.exp(m_log)
        d = a * m_log
        m_int = int(math.ceil(m_real))
        xk = int(math.floor(x * k))
        worst = -math.inf
        for e in range(n_env):
            env = sample_environment(dist, 1, xk + 2, seed + 47 * e + 14)
            profile = pot.build_profile(env, xk)
            cenv = hat_transform(profile, xk - 1)
            lhs = sum(passage_tail(cenv, int(i), m_int) for i in range(1, xk)) / k
            xi_sum = sum(pot.xi_n(env, int(i), d) for i in range(d + 1, xk))
            rhs = x * math.exp(-m_real ** (1.0 + a * math.log(kappa)) / (a * m_log)) \
                + c_k * xi_sum / k
            worst = max(worst, lhs - rhs)
            if lhs > rhs + 1e-12:
                violations += 1
        detail.append(f"M=e^{m_log}: worst lhs-rhs {worst:.3e}")
    return _finish("passage-tail-bound", violations, 2 * n_env, "; ".join(detail), t0)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def check_dp_vs_enumeration(seed=0, n_env=50, tol=1e-14):
    """DP equals exhaustive path enumeration for all m <= 6, k <= 12."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    violations = 0
    worst = 0.0
    n_cases = 0
    for e in range(n_env):
        env = sample_environment(dist, 1, 9, seed + 53 * e + 15)
        profile = pot.build_profile(env, 8)
        cenv = hat_transform(profile, 7)
        for m in range(2, 7):
            for k in range(1, 13):
                a = hit_prob_dp(cenv, 1, m, k)
                b = hit_prob_enumerate(cenv, 1, m, k)
                gap = abs(a - b)
                worst = max(worst, gap)
                n_cases += 1
                if gap > tol:
                    violations += 1
    return _finish("dp-vs-enumeration", violations, n_cases,
                   f"worst |DP - enum| = {worst:.2e} over {n_cases} cases", t0)


def check_hit_ratio_mc(seed=0, n_env=20, n_walks=100_000):
    """Monte Carlo exit race against the exact S-ratio, within 4 binomial sigma."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    rng = stream(seed, 6)
    violations = 0
    worst = 0.0
    for e in range(n_env):
        y = int(rng.integers(8, 26))
        x = int(rng.integers(1, y))
        env = sample_environment(dist, 0, y + 2, seed + 59 * e + 16)
        profile = pot.build_profile(env, y + 1)
        q = pot.hit_prob_ratio(profile, x, y)
        p_hat, _ = race_probability(env, x, 0, y, n_walks, seed + 61 * e)
        sigma = math.sqrt(max(q * (1 - q), 1e-12) / n_walks)
        z = abs(p_hat - q) / sigma
        worst = max(worst, z)
        if z > 4.0:
            violations += 1
    return _finish("hit-ratio-mc-oracle", violations, n_env,
                   f"worst |z| = {worst:.2f} (limit 4)", t0)


def check_lemma_ratio_root(seed=0, n_dists=10, tol=1e-6):
    """inf_{z>0} I_m(z)/z equals the bisection root of Lambda, to 1e-6."""
    t0 = time.perf_counter()
    rng = stream(seed, 7)
    violations = 0
    worst = 0.0
    checked = 0
    # the closed-form case first: rho atoms {1/2 w.p. .8, 2 w.p. .2} has root 2
    dist0 = standard_two_point()
    r0 = min_ratio_s(dist0)
    gap0 = abs(r0.value - 2.0)
    worst = max(worst, gap0)
    violations += int(gap0 > tol)
    checked += 1
    for e in range(n_dists):
        dist = random_ballistic_dist(rng, n_atoms=2 if e % 2 == 0 else 3)
        s = ballistic_summary(dist).lambda_root_s
        if not math.isfinite(s):
            continue
        r = min_ratio_s(dist)
        gap = abs(r.value - s)
        worst = max(worst, gap)
        violations += int(gap > tol)
        checked += 1
    return _finish("ratio-equals-root", violations, checked,
                   f"worst |min ratio - s| = {worst:.2e}", t0)


def check_legendre_duality(seed=0, n_checks=50, tol=1e-6):
    """The optimizer of the Legendre transform satisfies Lambda'(l*) = z."""
    t0 = time.perf_counter()
    rng = stream(seed, 8)
    violations = 0
    worst = 0.0
    for e in range(n_checks):
        dist = random_ballistic_dist(rng, n_atoms=2 + e % 2, require_finite_s=False)
        law = log_rho_law(dist)
        vmin, vmax = float(law.values.min()), float(law.values.max())
        if vmax - vmin < 1e-3:
            continue
        z = float(rng.uniform(vmin + 0.05 * (vmax - vmin), vmax - 0.05 * (vmax - vmin)))
        val = i_m(dist, z)
        # recover lambda* by re-running the inner bisection, then check the
        # derivative by centered differences of Lambda
        t = 1.0
        while law.dlog_mgf(-t) > z:
            t *= 2.0
        while law.dlog_mgf(t) < z:
            t *= 2.0
        from .search import bisect_root
        lam = bisect_root(lambda u: law.dlog_mgf(u) - z, -t, t, tol=1e-12)
        h = 1e-6
        dlam = (log_mgf_rho(dist, lam + h) - log_mgf_rho(dist, lam - h)) / (2 * h)
        gap = abs(dlam - z)
        worst = max(worst, gap)
        violations += int(gap > tol)
        if abs((lam * z - law.log_mgf(lam)) - val) > 1e-9:
            violations += 1
    return _finish("legendre-duality", violations, n_checks,
                   f"worst |Lambda'(l*) - z| = {worst:.2e}", t0)


def check_iphi_monotone(seed=0, x=0.6, L_list=(1, 2, 4, 8, 16), n_sites=2000):
    """The site-averaged variational value is nondecreasing in the depth L."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    r = i_f(x, dist, L=int(L_list[-1]), n_sites=n_sites, seed=seed,
            l_curve=tuple(L_list))
    vals = [v for _, v in r.l_curve]
    diffs = np.diff(vals)
    violations = int(np.sum(diffs < -1e-9))
    return _finish("variational-monotone-in-depth", violations, len(vals) - 1,
                   f"values {['%.5f' % v for v in vals]}", t0)


# ---------------------------------------------------------------------------
# walk-level checks
# ---------------------------------------------------------------------------

def check_velocity(seed=0, n_reps=100, n_steps=1_000_000):
    """Mean of X_n / n over replicas within 3 standard errors of the speed."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    v_p = ballistic_summary(dist).velocity
    speeds = np.empty(n_reps)
    width = int(1.6 * v_p * n_steps) + 4000
    for r in range(n_reps):
        env = sample_environment(dist, -2000, width + 2000, seed + r, stream_id=r)
        traj, _ = simulate_until(env, 0, Steps(n_steps), seed, mode=Mode.SUMMARY,
                                 window=16, stream_id=r)
        speeds[r] = traj.final_position / n_steps
    se = speeds.std(ddof=1) / math.sqrt(n_reps)
    z = abs(speeds.mean() - v_p) / se
    return _finish("annealed-velocity", int(z > 3.0), n_reps,
                   f"mean speed {speeds.mean():.5f} vs v={v_p:.5f} (|z|={z:.2f})", t0)


def check_block_inequalities(seed=0, n=20_000, A=3.0, c=4.0, x_upper=0.75,
                             x_lower=0.4, n_reps=300, n_chi=4000):
    """Annealed windowed-increment tails against the crossing-functional bounds.

    Upper: P[max increment >= x] <= n chi + 5 sigma.  Lower: P[max < x] <=
    exp(-(blocks) chi) + 5 sigma, with chi taken at its conservative
    confidence edge.
    """
    t0 = time.perf_counter()
    dist = standard_two_point()
    v_p = ballistic_summary(dist).velocity
    k = int(A * math.log(n))
    target = int(v_p * n)
    ck = int(c * k)
    stats = np.empty(n_reps)
    for r in range(n_reps):
        env = sample_environment(dist, -ck - 10 * k, target + 12 * k + ck,
                                 seed + r, stream_id=1000 + r)
        traj, _ = simulate_until(env, 0, HitSite(target), seed, mode=Mode.SUMMARY,
                                 window=k, stream_id=1000 + r)
        stats[r] = (traj.window_max or -k) / k
    violations = 0
    details = []
    # upper bound at x_upper
    p_hat = float(np.mean(stats >= x_upper))
    se_p = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / n_reps) / n_reps)
    est = chi_mc(dist, k, x_upper, c, n_chi, seed + 7919)
    rhs = n * est.mean + 5.0 * math.sqrt(se_p ** 2 + (n * est.stderr) ** 2)
    violations += int(p_hat > rhs)
    details.append(f"up: P={p_hat:.4f} vs n*chi+5s={rhs:.4f}")
    # lower bound at x_lower
    p_lo = float(np.mean(stats < x_lower))
    se_lo = math.sqrt(max(p_lo * (1 - p_lo), 1.0 / n_reps) / n_reps)
    est_lo = chi_mc(dist, k, x_lower, c, n_chi, seed + 104729)
    blocks = (target - k) // ck - 1
    chi_edge = max(est_lo.mean - 5.0 * est_lo.stderr, 0.0)
    rhs_lo = math.exp(-blocks * chi_edge) + 5.0 * se_lo
    violations += int(p_lo > rhs_lo)
    details.append(f"low: P={p_lo:.4f} vs exp(-b chi)+5s={rhs_lo:.4f}")
    return _finish("block-crossing-inequalities", violations, 2, "; ".join(details), t0)


def check_chi_component_bounds(seed=0, k=60, x=0.6, c=4.0, n_samples=2000):
    """Every sampled integrand and both components stay inside [0, 1]."""
    t0 = time.perf_counter()
    dist = standard_two_point()
    est = chi_mc(dist, k, x, c, n_samples, seed, keep_components=True)
    bad = 0
    for arr in (est.f, est.g):
        bad += int(np.any(arr < -1e-15) or np.any(arr > 1.0 + 1e-12))
    bad += int(not 0.0 <= est.mean <= 1.0)
    return _finish("chi-component-bounds", bad, 3,
                   f"mean {est.mean:.4g}, f in [{est.f.min():.3g},{est.f.max():.3g}]", t0)


# ---------------------------------------------------------------------------
# battery driver
# ---------------------------------------------------------------------------

def run_battery(scale: str = "full", seed: int = 20240718) -> list[CheckResult]:
    """The full inequality/identity battery; 'quick' shrinks every sample size."""
    q = scale == "quick"
    results = [
        check_decomposition(seed, n_env=100 if q else 1000),
        check_shift_identity(seed, n_env=100 if q else 1000),
        check_w_recursion(seed, n_env=100 if q else 1000),
        check_eqs_sandwich(seed, n_env=100 if q else 1000),
        check_hat_site_one(seed, n_env=100 if q else 1000),
        check_w_bound(seed, n_env=500 if q else 10_000, n_max=200 if q else 1000),
        check_eps_sandwich(seed, n_env=100 if q else 1000),
        check_drift_inequality(seed, n_sites=100_000 if q else 1_000_000),
        check_hat_l_monotone(seed, n_checks=200 if q else 1000),
        check_hat_l_limit(seed, n_checks=50 if q else 200),
        check_dp_domination(seed, n_checks=20 if q else 60),
        check_chebyshev_bound(seed, n_env=20 if q else 100),
        check_truncation_gap(seed, n_env=8 if q else 30),
        check_start_shift(seed, n_env=8 if q else 30),
        check_passage_tail_bound(seed, n_env=20 if q else 100),
        check_dp_vs_enumeration(seed, n_env=10 if q else 50),
        check_lemma_ratio_root(seed, n_dists=4 if q else 10),
        check_legendre_duality(seed, n_checks=10 if q else 50),
        check_iphi_monotone(seed, n_sites=500 if q else 2000),
        check_chi_component_bounds(seed, n_samples=500 if q else 2000),
        check_velocity(seed, n_reps=10 if q else 100,
                       n_steps=100_000 if q else 1_000_000),
        check_block_inequalities(seed, n=4000 if q else 20_000,
                                 n_reps=60 if q else 300, n_chi=1000 if q else 4000),
        check_hit_ratio_mc(seed, n_env=4 if q else 20,
                           n_walks=20_000 if q else 100_000),
    ]
    return results
