"""One-dimensional search helpers: golden-section maximization and bisection."""

from __future__ import annotations

import math

from .errors import BracketError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_max(f, lo: float, hi: float, tol: float = 1e-10,
               check_concave: bool = False, edge_guard: bool = True):
    """Maximize a concave ``f`` on [lo, hi] by golden-section search.

    Returns (argmax, value).  Endpoints are evaluated too, so a supremum
    attained on the boundary is reported exactly at the boundary.  With
    ``edge_guard`` the search refuses an argmax that sits against ``lo``
    (within tol) while still improving: that means the bracket was wrong.
    """
    if hi <= lo:
        raise ValueError(f"empty bracket [{lo}, {hi}]")
    evals = []

    def fe(x):
        y = f(x)
        evals.append((x, y))
        return y

    a, b = lo, hi
    h = b - a
    c = a + _INVPHI2 * h
    d = a + _INVPHI * h
    yc = fe(c)
    yd = fe(d)
    n = max(1, int(math.ceil(math.log(tol / h) / math.log(_INVPHI)))) if h > tol else 1
    for _ in range(n):
        if yc > yd:
            b, d, yd = d, c, yc
            h *= _INVPHI
            c = a + _INVPHI2 * h
            yc = fe(c)
        else:
            a, c, yc = c, d, yd
            h *= _INVPHI
            d = a + _INVPHI * h
            yd = fe(d)
    x_in = (a + b) / 2.0
    y_in = fe(x_in)
    # Boundary sup: compare against the raw endpoints.
    y_lo = fe(lo)
    y_hi = fe(hi)
    x_best, y_best = x_in, y_in
    if y_hi >= y_best:
        x_best, y_best = hi, y_hi
    if y_lo > y_best:
        x_best, y_best = lo, y_lo
    if edge_guard and x_best <= lo + 2.0 * tol and y_lo >= y_in:
        raise BracketError(
            f"argmax {x_best:.6g} sits on the lower bracket edge {lo:.6g}; widen the bracket")
    if check_concave:
        _assert_concave(evals)
    return x_best, y_best


def _assert_concave(evals, slack: float = 1e-9):
    """Midpoint-above-chord check on the sampled points, with absolute slack."""
    pts = sorted(set(evals))
    for (x0, y0), (x1, y1), (x2, y2) in zip(pts, pts[1:], pts[2:]):
        if x2 - x0 < 1e-14:
            continue
        t = (x1 - x0) / (x2 - x0)
        chord = (1.0 - t) * y0 + t * y2
        scale = max(1.0, abs(y0), abs(y2))
        if y1 < chord - slack * scale:
            raise ArithmeticError(
                f"objective not concave at x={x1:.6g}: value {y1:.12g} below chord {chord:.12g}")


def bisect_root(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Root of a monotone ``f`` with f(lo) < 0 < f(hi), to absolute ``tol`` in x."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo > 0 or fhi < 0:
        raise BracketError(f"bisection bracket does not straddle a root: f({lo})={flo}, f({hi})={fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)
