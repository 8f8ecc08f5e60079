"""Doob-conditioned environments.

Conditioning the walk on never returning to the origin is equivalent to
replacing each transition probability by

    hat(omega)_i = omega_i * S(i+1) / S(i),

anchored at the origin.  The stationarity-preserving truncation replaces the
origin anchor with a sliding window of depth L:

    hatL(omega)_i = omega_i * S(L+1, theta^{i-L} omega) / S(L, theta^{i-L} omega),

which decreases strictly in L at every site and dominates hat(omega) at sites
beyond L.  Both are computed through the cancellation-free form
omega_i * (1 + W(...)), never by subtracting nearby log-S values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .env_model import Environment
from .errors import CoverageError
from .potential import PotentialProfile, build_profile, local_log_s


class Kind(Enum):
    HAT = "hat"
    HAT_L = "hat_l"


@dataclass(frozen=True)
class ConditionedEnvironment:
    """Transformed transition probabilities over a site window [lo, lo+len)."""

    kind: Kind
    lo: int
    values: np.ndarray
    source: Environment
    truncation: int | None = None  # L for kind HAT_L

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if np.any(values <= 0.0) or np.any(values > 1.0):
            raise ValueError("conditioned transition probabilities must lie in (0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def hi(self) -> int:
        return self.lo + self.values.size

    def covers(self, a: int, b: int) -> bool:
        return self.lo <= a and b <= self.hi

    def require(self, a: int, b: int, what: str = "operation"):
        if not self.covers(a, b):
            raise CoverageError(
                f"{what} needs conditioned sites [{a}, {b}) but window is [{self.lo}, {self.hi})")

    def omega(self, i):
        return self.values[np.asarray(i) - self.lo]

    def slice(self, a: int, b: int) -> np.ndarray:
        self.require(a, b, "slice")
        return self.values[a - self.lo: b - self.lo]

    @property
    def log_rho(self) -> np.ndarray:
        """log((1 - value) / value); -inf where the value is exactly 1."""
        with np.errstate(divide="ignore"):
            return np.log1p(-self.values) - np.log(self.values)


def hat_transform(profile: PotentialProfile, hi: int) -> ConditionedEnvironment:
    """hat(omega)_i = omega_i (1 + W(i)) on sites [1, hi], from an origin profile.

    Site 1 is pinned to exactly 1.0 (the algebra forces omega_1 (1 + rho_1) = 1;
    storing the float product would poison mass conservation downstream).
    """
    if hi < 1:
        raise ValueError("hi must be >= 1")
    if profile.n_max < hi + 1:
        raise CoverageError(f"hat_transform to site {hi} needs a profile of depth {hi + 1}")
    idx = np.arange(1, hi + 1)
    w = np.exp(profile.v[idx] - profile.log_s[idx])
    values = profile.env.omega(idx) * (1.0 + w)
    values[0] = 1.0
    np.minimum(values, 1.0, out=values)
    return ConditionedEnvironment(kind=Kind.HAT, lo=1, values=values, source=profile.env)


def hat_l_transform(env: Environment, L: int, lo: int, hi: int) -> ConditionedEnvironment:
    """hatL(omega)_i = omega_i (1 + W(L, theta^{i-L} omega)) on sites [lo, hi].

    Each site is anchored at its own depth-L window, so env must cover
    [lo - L, hi].  Values are computed per-site from local log-domain
    accumulations (vectorized over the sliding windows).
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if hi < lo:
        raise ValueError("empty site range")
    env.require(lo - L + 1, hi + 1, "hat_l_transform")
    # V-differences within each depth-L window ending at site i:
    # W(L, theta^{i-L}) = exp(V_th(L)) / sum_{q<L} exp(V_th(q)), with
    # V_th(q) = g_{i-L+1} + ... + g_{i-L+q}.
    g = env.log_rho_slice(lo - L + 1, hi + 1)
    cum = np.concatenate(([0.0], np.cumsum(g)))
    # windows[j, q] = V at offset q of the window for site i = lo + j, q = 0..L
    windows = sliding_window_view(cum, L + 1)
    rel = windows - windows[:, :1]
    head = rel[:, :L]
    m = head.max(axis=1)
    log_s_l = m + np.log(np.exp(head - m[:, None]).sum(axis=1))
    log_w = rel[:, L] - log_s_l
    values = env.omega(np.arange(lo, hi + 1)) * (1.0 + np.exp(log_w))
    np.minimum(values, 1.0, out=values)
    return ConditionedEnvironment(kind=Kind.HAT_L, lo=lo, values=values,
                                  source=env, truncation=L)


def hat_l_from_origin_check(env: Environment, L: int, i: int) -> float:
    """Cross-formula residual for hatL at a site i > L, from the origin profile.

    The sliding-window definition must agree with
        omega_i (S(i+1) - S(i-L)) / (S(i) - S(i-L))
    computed from a single from-origin profile.  Returns the relative gap.
    The difference S(n) - S(i-L) is evaluated as exp(V(i-L)) S(n-(i-L),
    theta^{i-L}), which is the same quantity with the cancellation done in
    closed form.
    """
    if i <= L:
        raise ValueError("cross-formula needs i > L")
    profile = build_profile(env, i + 1)
    base = profile.v[i - L] if i - L >= 1 else 0.0
    log_num = base + local_log_s(env, i - L, L + 1)
    log_den = base + local_log_s(env, i - L, L)
    via_origin = float(env.omega(i) * math.exp(log_num - log_den))
    direct = float(hat_l_transform(env, L, i, i).values[0])
    return abs(via_origin - direct) / max(abs(direct), 1e-300)


def shat_shift_check(profile: PotentialProfile, a: int, b: int) -> float:
    """Log-domain residual of the shift identity for the conditioned Lyapunov sum.

    S(a, theta^b hat(omega)) must equal
        (S(b+1) S(b) / exp(V(b))) * (1/S(b) - 1/S(a+b)).
    The left side is computed by transforming the environment and summing its
    own potential from scratch; the right side uses the decomposition
    S(a+b) - S(b) = exp(V(b)) S(a, theta^b), which is the same closed form
    with the subtraction rewritten exactly.
    """
    if a < 1 or b < 1:
        raise ValueError("a and b must be positive integers")
    if profile.n_max < a + b + 1:
        raise CoverageError(f"shift check at (a={a}, b={b}) needs profile depth {a + b + 1}")
    env = profile.env
    cenv = hat_transform(profile, a + b)
    # Direct side: potential of the transformed environment, shifted by b.
    log_rho_hat = cenv.log_rho
    g = log_rho_hat[b: b + a - 1] if a > 1 else np.empty(0)  # rho_hat at sites b+1..b+a-1
    v = np.concatenate(([0.0], np.cumsum(g)))
    m = float(v.max())
    lhs = m + math.log(float(np.sum(np.exp(v - m))))
    # Closed form: log S(b+1) + log S(a, theta^b) - log S(a+b).
    rhs = float(profile.log_s[b + 1] + local_log_s(env, b, a) - profile.log_s[a + b])
    return abs(lhs - rhs)
