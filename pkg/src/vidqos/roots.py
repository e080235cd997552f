"""Bracketed scalar root finding.

Every solver in this package (QoS exponent product, the allocation duals,
service boundaries) reduces to a one-dimensional root of a monotone
function, so plain bisection with a residual-based stop is globally
convergent and is used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import VidqosError


class BracketError(VidqosError):
    """No sign change between the supplied bracket endpoints."""


@dataclass(frozen=True)
class RootResult:
    x: float
    fx: float
    lo: float            # final bracket, f(lo) and f(hi) straddle zero
    hi: float
    iterations: int
    converged: bool      # residual target met (vs. bracket-width exhaustion)


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    f_lo: float | None = None,
    f_hi: float | None = None,
    residual_tol: float = 0.0,
    x_rtol: float = 1e-14,
    max_iter: int = 300,
) -> RootResult:
    """Bisect for f(x) = 0 on [lo, hi].

    Stops when |f(mid)| <= residual_tol, or when the bracket width falls
    below x_rtol relative to its location.  f may be discontinuous
    (monotone step functions are fine); in that case the bracket collapses
    onto the jump and `converged` is False.
    """
    if not lo < hi:
        raise ValueError(f"bad bracket: lo={lo!r} hi={hi!r}")
    f_lo = f(lo) if f_lo is None else f_lo
    f_hi = f(hi) if f_hi is None else f_hi
    if f_lo == 0.0:
        return RootResult(lo, 0.0, lo, hi, 0, True)
    if f_hi == 0.0:
        return RootResult(hi, 0.0, lo, hi, 0, True)
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise BracketError(f"f({lo}) = {f_lo} and f({hi}) = {f_hi} have the same sign")

    x, fx = (lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi)
    for i in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < abs(fx):
            x, fx = mid, fm
        if residual_tol > 0.0 and abs(fm) <= residual_tol:
            return RootResult(mid, fm, lo, hi, i, True)
        if math.copysign(1.0, fm) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
        if (hi - lo) <= x_rtol * max(abs(lo), abs(hi)):
            break
    return RootResult(x, fx, lo, hi, max_iter, residual_tol <= 0.0 or abs(fx) <= residual_tol)


def expand_bracket_geometric(
    f: Callable[[float], float],
    start: float,
    *,
    factor: float = 2.0,
    limit: float,
    want_negative: bool = True,
    max_steps: int = 200,
) -> tuple[float, float, float, float]:
    """Grow x geometrically from `start` until f changes sign.

    Returns (lo, f_lo, hi, f_hi) with f(lo) and f(hi) of opposite sign.
    Raises BracketError if `limit` is reached first (the caller decides
    what running out of headroom means, e.g. an infeasible QoS point).
    """
    x = start
    fx = f(x)
    target_sign = -1.0 if want_negative else 1.0
    if math.copysign(1.0, fx) == target_sign or fx == 0.0:
        raise ValueError("f(start) already on the target side; nothing to expand")
    for _ in range(max_steps):
        x_next = x * factor
        if x_next > limit:
            raise BracketError(f"no sign change before limit {limit:g}")
        fx_next = f(x_next)
        if fx_next == 0.0 or math.copysign(1.0, fx_next) == target_sign:
            return x, fx, x_next, fx_next
        x, fx = x_next, fx_next
    raise BracketError("bracket expansion exceeded max_steps")
