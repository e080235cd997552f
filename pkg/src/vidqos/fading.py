"""SNR distributions and the fractional moment E[(1+g)^-nu].

Every statistical-delay computation in this package bottoms out in the
negative fractional moment of (1 + SNR):

    M(nu) = E[(1 + gamma)^-nu],   nu >= 0,

which is 1 at nu = 0, strictly decreasing in nu whenever the channel has
mass above zero SNR, and tends to the probability of a zero-SNR draw as
nu -> infinity.  Two distribution families are supported: Rayleigh fading
(exponential SNR with a given linear mean) and raw empirical SNR samples.

For Rayleigh channels the moment also has a closed form through the
generalized exponential integral,

    M(nu) = (1/gm) * exp(1/gm) * E_nu(1/gm),      gm = mean SNR,

kept here as an independent evaluation path; the generic path integrates
the defining expectation by adaptive quadrature.  Tests and the acceptance
suite cross-check the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.integrate import quad

from .errors import DistributionError, IntegrationError, MomentOrderError

# Orders beyond this underflow the moment for any practical channel; callers
# treat hitting the cap as an infeasible QoS point.
MAX_MOMENT_ORDER = 1e6

# Quadrature truncation: exp(-g/mean) tail mass beyond mean*ln(1e12) is < 1e-12.
_TAIL_LOG = math.log(1e12)

_QUAD_EPSREL = 1e-11


@dataclass(frozen=True)
class Rayleigh:
    """Rayleigh-faded link; SNR is exponentially distributed.

    mean_snr is the linear (not dB) average SNR.
    """

    mean_snr: float

    def __post_init__(self):
        if not (math.isfinite(self.mean_snr) and self.mean_snr > 0.0):
            raise DistributionError(f"Rayleigh mean SNR must be finite and > 0, got {self.mean_snr!r}")


@dataclass(frozen=True)
class EmpiricalSamples:
    """Channel described by raw linear-SNR samples (all >= 0, non-empty)."""

    samples: tuple[float, ...]

    def __post_init__(self):
        if len(self.samples) == 0:
            raise DistributionError("empirical sample list is empty")
        arr = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise DistributionError("empirical SNR samples must be finite and >= 0")
        object.__setattr__(self, "samples", tuple(float(s) for s in arr))

    def max_snr(self) -> float:
        return max(self.samples)


FadingDistribution = Rayleigh | EmpiricalSamples


def _check_order(nu: float) -> None:
    if not math.isfinite(nu) or nu < 0.0:
        raise MomentOrderError(f"moment order must be finite and >= 0, got {nu!r}")
    if nu > MAX_MOMENT_ORDER:
        raise MomentOrderError(
            f"moment order {nu:g} exceeds the {MAX_MOMENT_ORDER:g} guard; "
            "treat the QoS point as infeasible"
        )


def fractional_moment(dist: FadingDistribution, nu: float) -> float:
    """E[(1+gamma)^-nu] for the given SNR distribution.

    Exactly 1.0 at nu = 0.  For empirical samples this is the exact finite
    average; for Rayleigh it is adaptive quadrature over [0, mean*ln 1e12]
    with breakpoints resolving the 1/nu-wide integrand peak at the origin.

    Raises MomentOrderError beyond the order guard and IntegrationError if
    the quadrature cannot certify its result.
    """
    _check_order(nu)
    if nu == 0.0:
        return 1.0

    if isinstance(dist, EmpiricalSamples):
        s = np.asarray(dist.samples)
        with np.errstate(under="ignore"):
            return float(np.mean((1.0 + s) ** (-nu)))

    mean = dist.mean_snr
    gmax = mean * _TAIL_LOG
    inv_mean = 1.0 / mean

    def integrand(g: float) -> float:
        return (1.0 + g) ** (-nu) * math.exp(-g * inv_mean) * inv_mean

    # Breakpoints spanning the integrand's decay scales so the adaptive
    # routine cannot step over a peak much narrower than the interval.
    width = min(mean, 1.0 / max(nu, 1.0))
    pts = sorted({min(width * 10.0**k, 0.5 * gmax) for k in range(5)})
    out = quad(integrand, 0.0, gmax, points=pts, limit=200,
               epsabs=1e-300, epsrel=_QUAD_EPSREL, full_output=1)
    if len(out) > 3:
        raise IntegrationError(f"fractional moment quadrature failed: {out[3]}")
    value, abserr = out[0], out[1]
    if not math.isfinite(value) or value <= 0.0:
        raise IntegrationError(f"fractional moment quadrature returned {value!r}")
    if abserr > 1e-8 * abs(value) + 1e-300:
        raise IntegrationError(
            f"fractional moment quadrature error {abserr:g} too large for value {value:g}"
        )
    return min(value, 1.0)


def exponential_integral(order: float, x: float) -> float:
    """Generalized exponential integral E_a(x) = int_1^inf exp(-x t) / t^a dt.

    Real (non-integer) orders are supported; a >= 0 and x > 0.  E_0(x) is
    exp(-x)/x.  Evaluated via mpmath at elevated precision; out-of-domain
    arguments and float overflow are rejected rather than returned.
    """
    if not (math.isfinite(order) and order >= 0.0):
        raise ValueError(f"exponential integral order must be >= 0, got {order!r}")
    if not (math.isfinite(x) and x > 0.0):
        raise ValueError(f"exponential integral argument must be > 0, got {x!r}")
    with mpmath.workdps(30):
        value = float(mpmath.expint(mpmath.mpf(order), mpmath.mpf(x)))
    if math.isinf(value):
        raise OverflowError(f"E_{order:g}({x:g}) overflows a float")
    return value


def rayleigh_moment_closed_form(mean_snr: float, nu: float) -> float:
    """Closed-form E[(1+gamma)^-nu] for Rayleigh fading.

    (1/gm) exp(1/gm) E_nu(1/gm) with gm the linear mean SNR.  The product is
    formed at extended precision so exp(1/gm) cannot overflow on the way to
    a representable result.  Independent of fractional_moment's quadrature.
    """
    if not (math.isfinite(mean_snr) and mean_snr > 0.0):
        raise DistributionError(f"mean SNR must be finite and > 0, got {mean_snr!r}")
    if not (math.isfinite(nu) and nu > 0.0):
        raise ValueError(f"order must be > 0 for the closed form, got {nu!r}")
    _check_order(nu)
    with mpmath.workdps(30):
        x = mpmath.mpf(1.0) / mpmath.mpf(mean_snr)
        value = float(mpmath.exp(x) * mpmath.expint(mpmath.mpf(nu), x) / mean_snr)
    if math.isinf(value):
        raise OverflowError(f"closed-form moment overflows for mean_snr={mean_snr:g}, nu={nu:g}")
    return min(value, 1.0)
