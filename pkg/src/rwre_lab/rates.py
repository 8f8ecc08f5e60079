"""The rate-function hierarchy.

From bottom to top: the classical Cramer transform of a finite increment law;
the Legendre transform I_m of the log-rho cumulant and its minimized ratio
inf_{z>0} I_m(z)/z (which equals the ballistic root s); the hitting-time
functional

    I(x, q) = sup_{lambda <= 0} { lambda - x * E_q[log phi(hatL omega, lambda)] }

estimated by ergodic site averages over one long sample from a product
candidate q; the restricted variational value

    I*(x) = min_q { I(x, q) + x KL(q | p) }

over product measures on the base atoms (an upper bound for the full
infimum over stationary laws, and flagged as such); and the increment limit
x*(A) solving A I*(x*) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conditioned import hat_l_transform
from .env_model import EnvironmentDistribution, ballistic_summary, log_mgf_rho, sample_environment
from .errors import ContextError, NonBallisticError
from .hitting import certified_log_phi_chain, lambda_bracket
from .rng import BOOT_STREAM, stream
from .search import bisect_root, golden_max

RESTRICTED_FAMILY = "RESTRICTED_FAMILY"


# ---------------------------------------------------------------------------
# classical Cramer transform on a finite law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteLaw:
    """Finite-support law of a real increment."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.shape != weights.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("values and weights must be matching nonempty 1-d arrays")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def log_mgf(self, t: float) -> float:
        expo = np.log(self.weights) + t * self.values
        m = float(np.max(expo))
        return m + math.log(float(np.sum(np.exp(expo - m))))

    def dlog_mgf(self, t: float) -> float:
        expo = np.log(self.weights) + t * self.values
        m = float(np.max(expo))
        w = np.exp(expo - m)
        return float(np.dot(w, self.values) / np.sum(w))

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.values))

    @staticmethod
    def pm_one(p_up: float = 0.5) -> "FiniteLaw":
        return FiniteLaw(np.array([1.0, -1.0]), np.array([p_up, 1.0 - p_up]))


def cramer_rate(law: FiniteLaw, x: float) -> float:
    """I(x) = sup_t {tx - log E[e^{tX}]} for a finite law; +inf outside the hull."""
    vmin, vmax = float(law.values.min()), float(law.values.max())
    if x < vmin or x > vmax:
        return math.inf
    if x == vmin:
        return -math.log(float(law.weights[law.values == vmin].sum()))
    if x == vmax:
        return -math.log(float(law.weights[law.values == vmax].sum()))
    # stationarity: log_mgf'(t) = x; the derivative is increasing with range
    # (vmin, vmax), so the root bracket always closes.
    t = 1.0
    while law.dlog_mgf(-t) > x:
        t *= 2.0
    while law.dlog_mgf(t) < x:
        t *= 2.0
    t_star = bisect_root(lambda u: law.dlog_mgf(u) - x, -t, t, tol=1e-12)
    return float(t_star * x - law.log_mgf(t_star))


def a_alpha(law: FiniteLaw, alpha: float) -> float:
    """Window-scale constant 1 / I(alpha) of the windowed-increment law."""
    rate = cramer_rate(law, alpha)
    if not rate > 0:
        raise ValueError(f"I({alpha}) = {rate}; alpha must differ from the mean")
    return 1.0 / rate


# ---------------------------------------------------------------------------
# I_m and the minimized ratio
# ---------------------------------------------------------------------------

def log_rho_law(dist: EnvironmentDistribution) -> FiniteLaw:
    # merge duplicate log-rho atoms so hull-edge weights are exact
    vals, inv = np.unique(dist.log_rho_atoms, return_inverse=True)
    w = np.zeros(vals.size)
    np.add.at(w, inv, dist.weights)
    return FiniteLaw(vals, w)


def i_m(dist: EnvironmentDistribution, z: float) -> float:
    """Legendre transform of Lambda at z: sup_l {l z - log E[rho^l]}."""
    return cramer_rate(log_rho_law(dist), z)


@dataclass(frozen=True)
class SRatioResult:
    value: float
    z_star: float | None
    certificate: tuple | None = None  # (theta_grid, Lambda values) for the +inf sentinel


def min_ratio_s(dist: EnvironmentDistribution) -> SRatioResult:
    """inf_{z > 0} I_m(z)/z; equals the positive root of Lambda when finite.

    When every rho-atom is <= 1 the infimum is the +inf sentinel and a grid of
    Lambda values (all <= 0) is returned as the certificate.
    """
    law = log_rho_law(dist)
    z_max = float(law.values.max())
    if z_max <= 0.0:
        grid = np.linspace(0.5, 64.0, 32)
        lam_vals = np.array([log_mgf_rho(dist, t) for t in grid])
        return SRatioResult(value=math.inf, z_star=None,
                            certificate=(grid, lam_vals))
    if law.values.size == 1:
        # point mass on a positive atom: I_m vanishes there
        return SRatioResult(value=0.0, z_star=z_max)

    def ratio(z):
        return i_m(dist, z) / z

    zs = z_max * np.logspace(-6, 0, 200)
    zs[-1] = z_max * (1.0 - 1e-12)
    vals = np.array([ratio(z) for z in zs])
    j = int(np.argmin(vals))
    lo = zs[max(j - 1, 0)]
    hi = zs[min(j + 1, zs.size - 1)]
    if lo >= hi:
        return SRatioResult(value=float(vals[j]), z_star=float(zs[j]))
    z_star, neg = golden_max(lambda z: -ratio(z), float(lo), float(hi),
                             tol=1e-12, edge_guard=False)
    return SRatioResult(value=float(-neg), z_star=float(z_star))


# ---------------------------------------------------------------------------
# product candidates and per-site relative entropy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductMeasure:
    """Product law on the base atoms with reweighted single-site marginals."""

    base: EnvironmentDistribution
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.base.omegas.shape:
            raise ValueError("candidate weights must match the base atom vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("candidate weights must be a probability vector")
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def kl_per_site(self) -> float:
        return kl_weights(self.weights, self.base.weights)

    def as_distribution(self) -> EnvironmentDistribution:
        return EnvironmentDistribution(self.base.omegas, self.weights, self.base.kappa)


def kl_weights(q: np.ndarray, p: np.ndarray) -> float:
    """sum q log(q/p) over shared atoms; +inf when q charges a p-null atom."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    mask = q > 0
    if np.any(p[mask] == 0):
        return math.inf
    return float(np.sum(q[mask] * (np.log(q[mask]) - np.log(p[mask]))))


def kl_per_site(q: ProductMeasure | EnvironmentDistribution,
                p: EnvironmentDistribution) -> float:
    qw = q.weights
    q_atoms = q.base.omegas if isinstance(q, ProductMeasure) else q.omegas
    if q_atoms.shape != p.omegas.shape or np.any(q_atoms != p.omegas):
        raise ValueError("candidate must live on the base support atoms")
    return kl_weights(qw, p.weights)


# ---------------------------------------------------------------------------
# the hitting-time functional I(x, q) by ergodic site averages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IFResult:
    value: float
    stderr: float
    lam_star: float
    x: float
    L: int
    n_sites: int
    burn_in: int
    seed: int
    l_curve: tuple = ()     # ((L', value), ...) on the same sample
    mean_log_phi: float = 0.0


def i_f(x: float, q: ProductMeasure | EnvironmentDistribution,
        L: int = 64, n_sites: int = 4000, burn_in: int | None = None,
        seed: int = 0, n_boot: int = 200, l_curve: tuple = (),
        lam_tol: float = 1e-10) -> IFResult:
    """Estimate sup_{lambda<=0} {lambda - x * avg_i log phi_i(hatL, lambda)}.

    One long q-sample supplies n_sites sites; the lambda-sup is taken after
    site averaging.  The chain of phi values is seeded below the first counted
    site and certified by the two-seed bracket; the burn-in doubles (within
    the pre-allocated window) until certification holds at lambda = 0, the
    slowest-contracting point.  stderr comes from a block bootstrap over site
    blocks, holding lambda* fixed.
    """
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    dist = q.as_distribution() if isinstance(q, ProductMeasure) else q
    b0 = burn_in if burn_in is not None else max(64, 2 * L)
    b_cap = max(64 * 1024 // max(L, 1), 16 * b0)  # generous certification headroom
    env = sample_environment(dist, lo=1 - b_cap - L, length=n_sites + b_cap + L + 1,
                             seed=seed)

    def chain_values(b, depth):
        cenv = hat_l_transform(env, depth, 1 - b, n_sites)
        return cenv.slice(1 - b, n_sites + 1)

    b = b0
    values = chain_values(b, L)
    while certified_log_phi_chain(values, 0.0, b) is None:
        if b * 2 > b_cap:
            raise ContextError(
                f"i_f certification failed up to burn-in {b}; the candidate drifts too slowly")
        b *= 2
        values = chain_values(b, L)

    def mean_log_phi(lam, vals=None, bb=None):
        out = certified_log_phi_chain(values if vals is None else vals, lam,
                                      b if bb is None else bb)
        if out is None:
            raise ContextError("phi chain lost certification during the lambda search")
        return out

    def objective(lam):
        return lam - x * float(np.mean(mean_log_phi(lam)))

    lam_lo = lambda_bracket(dist.kappa, x)
    lam_star, value = golden_max(objective, lam_lo, 0.0, tol=lam_tol, check_concave=True)

    logphi = mean_log_phi(lam_star)
    mlp = float(np.mean(logphi))
    # block bootstrap over site blocks, lambda* held fixed
    n_blocks = max(10, min(50, n_sites // 20))
    edges = np.linspace(0, logphi.size, n_blocks + 1).astype(int)
    block_means = np.array([logphi[a:b_].mean() for a, b_ in zip(edges, edges[1:])])
    brng = stream(seed, 0, namespace=BOOT_STREAM)
    idx = brng.integers(0, n_blocks, size=(n_boot, n_blocks))
    boot_vals = x * block_means[idx].mean(axis=1)
    stderr = float(boot_vals.std(ddof=1))

    curve = []
    for lp in l_curve:
        vals_p = chain_values(b, int(lp))

        def obj_p(lam, vp=vals_p):
            out = certified_log_phi_chain(vp, lam, b)
            if out is None:
                raise ContextError("phi chain lost certification on the L-curve")
            return lam - x * float(np.mean(out))

        _, v_p = golden_max(obj_p, lam_lo, 0.0, tol=lam_tol)
        curve.append((int(lp), float(v_p)))

    return IFResult(value=float(value), stderr=stderr, lam_star=float(lam_star),
                    x=x, L=L, n_sites=n_sites, burn_in=b, seed=seed,
                    l_curve=tuple(curve), mean_log_phi=mlp)


# ---------------------------------------------------------------------------
# restricted variational value and the increment limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IStarResult:
    value: float
    stderr: float
    weights: np.ndarray
    x: float
    flag: str
    if_value: float
    kl_value: float
    grid: tuple = ()        # ((weights..., objective), ...) diagnostics

    @property
    def restricted(self) -> bool:
        return self.flag == RESTRICTED_FAMILY


def _simplex_grid(n_atoms: int, step: float):
    """All weight vectors on the n-simplex with the given resolution."""
    ticks = int(round(1.0 / step))

    def rec(prefix, remaining, slots):
        if slots == 1:
            yield prefix + [remaining]
            return
        for j in range(remaining + 1):
            yield from rec(prefix + [j], remaining - j, slots - 1)

    for combo in rec([], ticks, n_atoms):
        yield np.array(combo, dtype=float) / ticks


def i_star(x: float, p: EnvironmentDistribution, L: int = 64,
           n_sites: int = 4000, seed: int = 0, grid_step: float = 0.05,
           refine_tol: float = 1e-4, burn_in: int | None = None) -> IStarResult:
    """min over product candidates q of { I(x, q) + x KL(q|p) }, coarse grid
    plus derivative-free refinement.

    The search family is product measures on p's atoms only, so the result is
    an upper bound for the infimum over all stationary laws; every output
    carries the RESTRICTED_FAMILY flag.  Common random numbers (one seed for
    every candidate) keep the objective smooth in the weights.
    """
    ballistic_summary(p)  # rejects non-ballistic bases
    n_atoms = p.omegas.size

    def objective(weights):
        q = ProductMeasure(p, weights)
        kl = q.kl_per_site
        if math.isinf(kl):
            return math.inf, None, kl
        r = i_f(x, q, L=L, n_sites=n_sites, seed=seed, n_boot=50, burn_in=burn_in)
        return r.value + x * kl, r, kl

    candidates = list(_simplex_grid(n_atoms, grid_step))
    if not any(np.allclose(w, p.weights) for w in candidates):
        candidates.append(np.array(p.weights))
    diag = []
    best = (math.inf, None, None, None)
    for w in candidates:
        try:
            val, r, kl = objective(w)
        except ContextError:
            continue
        diag.append((tuple(np.round(w, 6)), val))
        if val < best[0]:
            best = (val, w, r, kl)
    if best[1] is None:
        raise ContextError("no feasible candidate in the restricted family")

    w_best = np.asarray(best[1])
    if n_atoms == 2:
        lo = max(0.0, w_best[0] - grid_step)
        hi = min(1.0, w_best[0] + grid_step)

        def neg_obj(w0):
            val, _, _ = objective(np.array([w0, 1.0 - w0]))
            return -val

        w0_star, neg = golden_max(neg_obj, lo, hi, tol=refine_tol, edge_guard=False)
        if -neg < best[0]:
            val, r, kl = objective(np.array([w0_star, 1.0 - w0_star]))
            if val < best[0]:
                best = (val, np.array([w0_star, 1.0 - w0_star]), r, kl)
    else:
        from scipy.optimize import minimize

        def penalized(free):
            w = np.abs(free) / np.sum(np.abs(free))
            val, _, _ = objective(w)
            return val

        res = minimize(penalized, w_best + 1e-3, method="Nelder-Mead",
                       options={"xatol": refine_tol, "fatol": refine_tol, "maxfev": 200})
        w = np.abs(res.x) / np.sum(np.abs(res.x))
        val, r, kl = objective(w)
        if val < best[0]:
            best = (val, w, r, kl)

    val, w, r, kl = best
    return IStarResult(value=float(val), stderr=r.stderr, weights=np.asarray(w),
                       x=x, flag=RESTRICTED_FAMILY, if_value=r.value,
                       kl_value=float(kl), grid=tuple(diag))


@dataclass(frozen=True)
class XStarResult:
    x_point: float
    x_lo: float
    x_hi: float
    boundary: bool          # True when A * I*(x) < 1 all the way to x = 1
    A: float
    evaluations: tuple = ()
    flag: str = RESTRICTED_FAMILY


def x_star(A: float, p: EnvironmentDistribution, L: int = 64, n_sites: int = 4000,
           seed: int = 0, x_edge: float = 0.995, width_tol: float = 0.02,
           grid_step: float = 0.05, max_iter: int = 12) -> XStarResult:
    """Bisection in x of A * I*(x) = 1 with Monte Carlo error bars.

    Returns a bracket [x_lo, x_hi] certified (at 3 stderr) to straddle the
    root of the restricted-family curve, plus the point estimate.  When even
    A * I*(x_edge) < 1 the boundary flag is set and x* = 1 is reported.
    """
    if A <= 0:
        raise ValueError("A must be positive")
    evals = []

    def g(x):
        r = i_star(x, p, L=L, n_sites=n_sites, seed=seed, grid_step=grid_step)
        evals.append((x, r.value, r.stderr))
        return r

    hi_res = g(x_edge)
    if A * (hi_res.value + 3 * hi_res.stderr) < 1.0:
        return XStarResult(x_point=1.0, x_lo=x_edge, x_hi=1.0, boundary=True,
                           A=A, evaluations=tuple(evals))
    x_lo, x_hi = 1e-3, x_edge
    for _ in range(max_iter):
        if x_hi - x_lo < width_tol:
            break
        mid = 0.5 * (x_lo + x_hi)
        r = g(mid)
        if A * (r.value - 3 * r.stderr) > 1.0:
            x_hi = mid
        elif A * (r.value + 3 * r.stderr) < 1.0:
            x_lo = mid
        else:
            # statistically unresolvable at this noise level: the bracket
            # collapses onto the midpoint's confidence band
            x_lo = max(x_lo, mid - width_tol)
            x_hi = min(x_hi, mid + width_tol)
            break
    # point estimate by linear interpolation of A*I* - 1 across the bracket ends
    pts = sorted((xx, v) for xx, v, _ in evals if x_lo <= xx <= x_hi)
    if len(pts) >= 2:
        (xa, va), (xb, vb) = pts[0], pts[-1]
        ga, gb = A * va - 1.0, A * vb - 1.0
        x_point = xa - ga * (xb - xa) / (gb - ga) if gb != ga else 0.5 * (x_lo + x_hi)
        x_point = min(max(x_point, x_lo), x_hi)
    else:
        x_point = 0.5 * (x_lo + x_hi)
    return XStarResult(x_point=float(x_point), x_lo=float(x_lo), x_hi=float(x_hi),
                       boundary=False, A=A, evaluations=tuple(evals))


# ---------------------------------------------------------------------------
# floor check for the block-reduction bound I_c(y) >= s y
# ---------------------------------------------------------------------------

def if_floor_check(p: EnvironmentDistribution, y_grid, tol: float = 1e-6,
                   n_split: int = 64, n_max: int = 8):
    """Verify the single- and multi-block reductions of the floor bound.

    For each y > 0 in the grid: I_m(y) >= s y, the best 2-block split
    min_{0<u<y} I_m(u) + I_m(y-u) >= s y, and N I_m(y/N) >= s y for
    N = 1..n_max, all within ``tol``.  Returns a list of per-y reports.
    """
    s = ballistic_summary(p).lambda_root_s
    if not math.isfinite(s):
        raise ValueError("floor check needs a finite root s")
    out = []
    for y in y_grid:
        if y < 0:
            raise ValueError("y grid must be nonnegative")
        if y == 0:
            out.append({"y": 0.0, "one_block": 0.0, "two_block": 0.0,
                        "n_block_min": 0.0, "floor": 0.0, "ok": True})
            continue
        one = i_m(p, y)
        splits = np.linspace(0.0, y, n_split + 2)[1:-1]
        two = min(i_m(p, u) + i_m(p, y - u) for u in splits)
        nb = min(n * i_m(p, y / n) for n in range(1, n_max + 1))
        floor = s * y
        ok = (one >= floor - tol) and (two >= floor - tol) and (nb >= floor - tol)
        out.append({"y": float(y), "one_block": float(one), "two_block": float(two),
                    "n_block_min": float(nb), "floor": float(floor), "ok": bool(ok)})
    return out


# ---------------------------------------------------------------------------
# tabulated curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatePoint:
    x: float
    value: float
    lam_star: float
    stderr: float = 0.0
    L: int | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RateCurve:
    kind: str   # "cramer" | "im" | "if" | "istar"
    points: tuple

    def rows(self):
        for pt in self.points:
            yield {"x": pt.x, "value": pt.value, "lambda_star": pt.lam_star,
                   "stderr": pt.stderr, "L": pt.L}

    def convex_on_grid(self, tol: float = 1e-9) -> bool:
        pts = sorted(self.points, key=lambda p: p.x)
        for a, b, c in zip(pts, pts[1:], pts[2:]):
            t = (b.x - a.x) / (c.x - a.x)
            chord = (1 - t) * a.value + t * c.value
            if b.value > chord + tol + 3 * (a.stderr + b.stderr + c.stderr):
                return False
        return True
