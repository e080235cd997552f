"""Delay targets and the per-user constants that drive allocation.

A user's statistical delay requirement is Pr{delay > D} <= P.  Under
uncorrelated block fading with per-block service B*T*log2(1+gamma) bits,
meeting the target with equality pins the fading moment

    E[(1 + gamma)^-(x / ln 2)] = P^(1/D),      x = B * theta * T,

where theta is the queue-tail QoS exponent.  The product x is a channel/QoS
constant, independent of how much bandwidth the user is eventually given;
dividing the delay budget out of it yields the user's source spectral
efficiency (SSE),

    sse = ln(1/P) / (D * x)        [bits/s/Hz],

the largest source rate per allocated Hz compatible with the delay target.
The solver stores x = (exponent product) * (coherence time) jointly, which
makes the coherence-time cancellation in SSE structural: the same target and
channel give the same SSE whatever T is assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import QosInfeasibleError
from .fading import (
    MAX_MOMENT_ORDER,
    EmpiricalSamples,
    FadingDistribution,
    fractional_moment,
)
from .roots import BracketError, bisect_root, expand_bracket_geometric

LN2 = math.log(2.0)

#: Coherence time assumed when a caller does not specify one.  It scales the
#: per-bit QoS exponent and the queue simulator but cancels out of SSE, so
#: allocation outcomes do not depend on it.
DEFAULT_COHERENCE_TIME_S = 1e-3

#: Relative tolerance on |moment(x) - target| at the returned root.
SOLVE_RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class QosTarget:
    """Statistical delay requirement: Pr{delay > delay_bound_s} <= violation_prob."""

    delay_bound_s: float
    violation_prob: float

    def __post_init__(self):
        if not (math.isfinite(self.delay_bound_s) and self.delay_bound_s > 0.0):
            raise ValueError(f"delay bound must be finite and > 0 s, got {self.delay_bound_s!r}")
        if not (0.0 < self.violation_prob < 1.0):
            # The degenerate targets (always-violate or no deadline) admit the
            # trivial zero-bandwidth solution and are rejected outright.
            raise ValueError(f"violation probability must lie in (0,1), got {self.violation_prob!r}")


@dataclass(frozen=True)
class QosDerived:
    """Constants derived from (QosTarget, FadingDistribution).

    moment_target       target value of the fading moment, P^(1/D)
    bw_exponent_product bandwidth * QoS exponent * coherence time (dimensionless)
    sse                 source spectral efficiency in bits/s/Hz
    """

    moment_target: float
    bw_exponent_product: float
    sse: float


def moment_target(target: QosTarget) -> float:
    """P^(1/D): the moment level at which the delay target is met exactly."""
    return target.violation_prob ** (1.0 / target.delay_bound_s)


def derive_qos(
    target: QosTarget,
    dist: FadingDistribution,
    *,
    residual_rtol: float = SOLVE_RESIDUAL_RTOL,
) -> QosDerived:
    """Solve the moment equation for the bandwidth-QoS exponent product.

    Bracketed bisection on nu = x/ln2: the moment is strictly decreasing in
    nu, so the bracket [1e-12, doubling upper end] always contains the root
    when one exists.  Raises QosInfeasibleError when the target lies below
    what the channel can reach within the order guard (including the
    degenerate all-zero-SNR channel).
    """
    p = moment_target(target)

    if isinstance(dist, EmpiricalSamples) and dist.max_snr() == 0.0:
        raise QosInfeasibleError("degenerate channel: every SNR sample is zero")

    def residual(nu: float) -> float:
        return fractional_moment(dist, nu) - p

    lo = 1e-12
    r_lo = residual(lo)
    while r_lo <= 0.0 and lo > 1e-300:
        # Target within rounding of 1: nudge the bracket down.
        lo *= 1e-6
        r_lo = residual(lo)
    if r_lo <= 0.0:
        raise QosInfeasibleError(f"moment target {p!r} is not below the moment at nu -> 0")

    try:
        b_lo, rb_lo, b_hi, rb_hi = expand_bracket_geometric(
            residual, max(lo, 1.0), limit=MAX_MOMENT_ORDER, want_negative=True
        )
    except ValueError:
        # residual(1) already negative: root is in [lo, 1].
        b_lo, rb_lo, b_hi, rb_hi = lo, r_lo, max(lo * 2, 1.0), residual(max(lo * 2, 1.0))
    except BracketError as exc:
        raise QosInfeasibleError(
            "QoS point infeasible for this channel: target moment "
            f"{p:g} unreachable within the order guard ({exc})"
        ) from exc

    root = bisect_root(
        residual, b_lo, b_hi, f_lo=rb_lo, f_hi=rb_hi,
        residual_tol=residual_rtol * p, x_rtol=1e-15, max_iter=400,
    )
    if not root.converged:
        raise QosInfeasibleError(
            f"moment equation residual {root.fx:g} did not meet {residual_rtol * p:g}"
        )

    product = root.x * LN2
    sse = math.log(1.0 / target.violation_prob) / (target.delay_bound_s * product)
    return QosDerived(moment_target=p, bw_exponent_product=product, sse=sse)


def qos_exponent_for_rate(
    target: QosTarget,
    rate_bps: float,
    coherence_time_s: float = DEFAULT_COHERENCE_TIME_S,
) -> float:
    """Per-bit queue-tail exponent theta for a user served at the given rate.

    theta = ln(1/P) / (T * R * D).  Consistent with QosDerived: bandwidth
    recovered as (product / T) / theta reproduces rate/bandwidth = sse.
    """
    if not (rate_bps > 0.0 and coherence_time_s > 0.0):
        raise ValueError("rate and coherence time must be > 0")
    return math.log(1.0 / target.violation_prob) / (
        coherence_time_s * rate_bps * target.delay_bound_s
    )


def max_rate(derived: QosDerived, bandwidth_hz: float) -> float:
    """Largest source rate the delay target allows on the given bandwidth."""
    if bandwidth_hz < 0.0:
        raise ValueError(f"bandwidth must be >= 0, got {bandwidth_hz!r}")
    return derived.sse * bandwidth_hz
