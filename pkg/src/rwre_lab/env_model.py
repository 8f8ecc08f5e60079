"""Single-site environment laws, sampling, and scalar ballisticity quantities.

The walk moves right from site i with probability omega_i.  The law of a
single omega is a finite-support distribution on [kappa, 1 - kappa]; the
offspring ratio rho = (1 - omega) / omega drives everything downstream: the
cumulant function Lambda(theta) = log E[rho^theta], its positive root s, and
the asymptotic speed v = (1 - E rho) / (1 + E rho).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EllipticityError, NonBallisticError
from .rng import ENV_STREAM, stream
from .search import bisect_root

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class EnvironmentDistribution:
    """Finite-support law of a single transition probability omega_0.

    atoms: (omegas[i], weights[i]) pairs with omegas in [kappa, 1 - kappa],
    weights summing to one.
    """

    omegas: np.ndarray
    weights: np.ndarray
    kappa: float

    def __post_init__(self):
        omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if omegas.size == 0:
            raise ValueError("distribution needs at least one atom")
        if omegas.shape != weights.shape:
            raise ValueError("omegas and weights must have matching shapes")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if np.any(omegas < self.kappa - 1e-15) or np.any(omegas > 1.0 - self.kappa + 1e-15):
            raise EllipticityError(
                f"atoms {omegas.tolist()} outside [{self.kappa}, {1.0 - self.kappa}]")
        if np.any(weights < 0):
            raise ValueError("negative atom weight")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()}, not 1")
        omegas.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "weights", weights)

    @property
    def rho_atoms(self) -> np.ndarray:
        return (1.0 - self.omegas) / self.omegas

    @property
    def log_rho_atoms(self) -> np.ndarray:
        return np.log(self.rho_atoms)

    @property
    def mean_rho(self) -> float:
        return float(np.dot(self.weights, self.rho_atoms))

    @property
    def mean_log_rho(self) -> float:
        return float(np.dot(self.weights, self.log_rho_atoms))

    def cdf_thresholds(self) -> np.ndarray:
        return np.cumsum(self.weights)


@dataclass(frozen=True)
class Environment:
    """A realized window {omega_i : lo <= i < lo + len}; immutable after construction."""

    lo: int
    values: np.ndarray
    kappa: float
    seed: int | None = None
    log_rho: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("environment window must be a nonempty 1-d array")
        if np.any(values < self.kappa - 1e-15) or np.any(values > 1.0 - self.kappa + 1e-15):
            raise EllipticityError("environment value outside [kappa, 1-kappa]")
        values.setflags(write=False)
        log_rho = np.log1p(-values) - np.log(values)
        log_rho.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "log_rho", log_rho)

    @property
    def hi(self) -> int:
        """One past the last covered site."""
        return self.lo + self.values.size

    def covers(self, a: int, b: int) -> bool:
        """Whether all sites in the half-open range [a, b) are present."""
        return self.lo <= a and b <= self.hi and a <= b

    def require(self, a: int, b: int, what: str = "operation"):
        if not self.covers(a, b):
            from .errors import CoverageError
            raise CoverageError(
                f"{what} needs sites [{a}, {b}) but the window is [{self.lo}, {self.hi})")

    def omega(self, i):
        """omega at site(s) i (int or integer array)."""
        idx = np.asarray(i) - self.lo
        return self.values[idx]

    def log_rho_at(self, i):
        idx = np.asarray(i) - self.lo
        return self.log_rho[idx]

    def slice(self, a: int, b: int) -> np.ndarray:
        """values over the half-open site range [a, b)."""
        self.require(a, b, "slice")
        return self.values[a - self.lo: b - self.lo]

    def log_rho_slice(self, a: int, b: int) -> np.ndarray:
        self.require(a, b, "log_rho_slice")
        return self.log_rho[a - self.lo: b - self.lo]

    @property
    def c_kappa(self) -> float:
        return (1.0 - self.kappa) / self.kappa

    @staticmethod
    def constant(omega: float, lo: int, length: int, kappa: float | None = None) -> "Environment":
        if kappa is None:
            kappa = min(omega, 1.0 - omega)
        return Environment(lo=lo, values=np.full(length, float(omega)), kappa=kappa)


@dataclass(frozen=True)
class BallisticSummary:
    """Scalar quantities of a ballistic law: the root s of Lambda, the speed, and moments."""

    lambda_root_s: float  # root of Lambda on (1, inf); math.inf when all rho-atoms <= 1
    velocity: float
    mean_rho: float
    mean_log_rho: float

    @property
    def s_is_finite(self) -> bool:
        return math.isfinite(self.lambda_root_s)


def make_two_point(omega_a: float, omega_b: float, weight_a: float,
                   kappa: float) -> EnvironmentDistribution:
    """Two-atom law: omega_a with probability weight_a, omega_b otherwise.

    Degenerate weights (0 or 1) collapse to a single atom, as do equal omegas.
    """
    if not 0.0 <= weight_a <= 1.0:
        raise ValueError(f"weight_a must lie in [0, 1], got {weight_a}")
    if weight_a == 1.0 or omega_a == omega_b:
        return EnvironmentDistribution(np.array([omega_a]), np.array([1.0]), kappa)
    if weight_a == 0.0:
        return EnvironmentDistribution(np.array([omega_b]), np.array([1.0]), kappa)
    return EnvironmentDistribution(
        np.array([omega_a, omega_b]), np.array([weight_a, 1.0 - weight_a]), kappa)


def standard_two_point(kappa: float = 0.1) -> EnvironmentDistribution:
    """The workhorse ballistic test law: rho-atoms {1/2 w.p. 0.8, 2 w.p. 0.2}."""
    return make_two_point(2.0 / 3.0, 1.0 / 3.0, 0.8, kappa)


def sample_environment(dist: EnvironmentDistribution, lo: int, length: int,
                       seed: int, stream_id: int = 0) -> Environment:
    """Draw an i.i.d. window of ``length`` sites starting at ``lo``.

    Deterministic in (dist, lo, length, seed, stream_id); sampling is by
    inverse CDF over the atom thresholds so results do not depend on numpy's
    choice() implementation details.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = stream(seed, stream_id, namespace=ENV_STREAM)
    u = rng.random(length)
    idx = np.searchsorted(dist.cdf_thresholds(), u, side="right")
    idx = np.minimum(idx, dist.omegas.size - 1)
    return Environment(lo=lo, values=dist.omegas[idx], kappa=dist.kappa, seed=seed)


def log_mgf_rho(dist: EnvironmentDistribution, theta: float) -> float:
    """Lambda(theta) = log sum_a w_a rho_a^theta, via a max-shifted exponential sum."""
    expo = np.log(dist.weights) + theta * dist.log_rho_atoms
    m = float(np.max(expo))
    return m + math.log(float(np.sum(np.exp(expo - m))))


def ballistic_summary(dist: EnvironmentDistribution) -> BallisticSummary:
    """Compute (s, v, E rho, E log rho); reject laws with E rho >= 1.

    s is the unique positive root of Lambda when some rho-atom exceeds 1,
    found by bisection to 1e-10; when every rho-atom is <= 1, Lambda stays
    nonpositive on (0, inf) and s is the +inf sentinel.
    """
    mean_rho = dist.mean_rho
    if mean_rho >= 1.0:
        raise NonBallisticError(
            f"E[rho] = {mean_rho:.6g} >= 1: zero speed, the increment law has no positive limit")
    velocity = (1.0 - mean_rho) / (1.0 + mean_rho)
    mean_log_rho = dist.mean_log_rho
    if np.all(dist.rho_atoms <= 1.0):
        s = math.inf
    else:
        # Lambda(1) = log E rho < 0 and Lambda is convex with Lambda -> inf,
        # so the root lies in (1, inf); grow the bracket then bisect.
        hi = 2.0
        while log_mgf_rho(dist, hi) <= 0.0:
            hi *= 2.0
            if hi > 1e9:  # pragma: no cover - ellipticity makes this unreachable
                raise ArithmeticError("root bracket for s grew without bound")
        s = bisect_root(lambda t: log_mgf_rho(dist, t), 1.0, hi, tol=1e-10)
    return BallisticSummary(lambda_root_s=s, velocity=velocity,
                            mean_rho=mean_rho, mean_log_rho=mean_log_rho)
