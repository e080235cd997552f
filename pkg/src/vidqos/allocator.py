"""Bandwidth and source-rate allocation across a fixed user set.

Two policies over users k with source spectral efficiency sse_k and concave
rate-quality curves Q_k:

  sum-quality   maximize sum_k Q_k(R_k) subject to sum_k R_k/sse_k = B.
                Stationarity: Q_k'(R_k) * sse_k = rho for every user not
                pinned at a representation limit; the dual price rho is found
                by bisection, since total demanded bandwidth is monotone
                non-increasing in rho.

  fairness      maximize min_k Q_k(R_k): every served user ends at a common
                quality q, with bandwidth Q_k^{-1}(q)/sse_k; q is found by
                bisection on the (continuous, increasing) total bandwidth.

Users whose stationarity point falls below their minimum representation are
pinned there (bandwidth fixed at R_min/sse) and flagged; the caller is
expected to have pre-filtered with the scheduler, so the allocator reports
rather than drops.  Piecewise-linear (tabulated) curves make the dual demand
a step function; the bisection collapses onto the jump and the marginal
users absorb the residual budget inside their active segment, which is
exactly the subdifferential form of the stationarity condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import AllocationError, CurveDomainError, InfeasibleAllocationError
from .fading import FadingDistribution, fractional_moment
from .qos import (
    DEFAULT_COHERENCE_TIME_S,
    LN2,
    QosDerived,
    QosTarget,
    derive_qos,
    qos_exponent_for_rate,
)
from .ratequality import (
    LogCurve,
    RateQualityCurve,
    ShiftedPowerCurve,
    inverse_quality_extended,
    inverse_slope_extended,
)
from .roots import bisect_root

POLICY_SUM_QUALITY = "sum_quality"
POLICY_FAIRNESS = "fairness"

_BUDGET_RTOL = 1e-10       # bisection residual aim, inside the 1e-9 contract
_REL_EPS = 1e-12


@dataclass(frozen=True)
class UserProfile:
    """Everything the allocator needs to know about one video user."""

    user_id: str
    target: QosTarget
    dist: FadingDistribution
    curve: RateQualityCurve
    derived: QosDerived


def make_profile(
    user_id: str,
    target: QosTarget,
    dist: FadingDistribution,
    curve: RateQualityCurve,
) -> UserProfile:
    """Build a profile, solving the QoS constants for (target, dist)."""
    return UserProfile(user_id, target, dist, curve, derive_qos(target, dist))


def verify_profile(profile: UserProfile, rtol: float = 1e-8) -> None:
    """Check that `derived` is consistent with (target, dist)."""
    p = profile.derived.moment_target
    nu = profile.derived.bw_exponent_product / LN2
    m = fractional_moment(profile.dist, nu)
    if abs(m - p) > rtol * p:
        raise ValueError(
            f"profile {profile.user_id!r}: moment residual {abs(m - p):g} exceeds {rtol * p:g}"
        )


@dataclass(frozen=True)
class UserAllocation:
    user_id: str
    bandwidth_hz: float
    rate_bps: float
    qos_exponent: float
    quality: float
    clamped_min: bool = False     # pinned at the minimum representation
    saturated: bool = False       # pinned at the top of a tabulated curve
    below_common: bool = False    # fairness: own minimum quality above the common q
    servable: bool = True         # rate reaches the minimum representation


@dataclass(frozen=True)
class AllocationResult:
    policy: str
    entries: tuple[UserAllocation, ...]
    total_bandwidth_hz: float
    dual_price: float | None = None      # sum-quality: rho = slope * sse, common to all
    common_quality: float | None = None  # fairness: the shared quality level

    def entry(self, user_id: str) -> UserAllocation:
        for e in self.entries:
            if e.user_id == user_id:
                return e
        raise KeyError(user_id)

    def total_quality(self) -> float:
        return sum(e.quality for e in self.entries)

    def min_quality(self) -> float:
        return min(e.quality for e in self.entries)

    def bandwidth_used_hz(self) -> float:
        return sum(e.bandwidth_hz for e in self.entries)


def _quality_for_report(curve: RateQualityCurve, rate_bps: float) -> float:
    """Quality at a rate that may sit below the representation floor."""
    try:
        return curve.quality(rate_bps)
    except CurveDomainError:
        if rate_bps <= 0.0:
            return -math.inf
        if isinstance(curve, (LogCurve, ShiftedPowerCurve)):
            # The parametric formulas extend below min_rate.
            return replace(curve, min_rate_bps=0.0).quality(rate_bps)
        return curve.quality(curve.min_rate_bps)


@dataclass
class _SumUser:
    profile: UserProfile
    sse: float
    b_min: float
    rho_clamp: float   # duals at or above this pin the user at min rate
    b_top: float       # saturating bandwidth (inf for unbounded curves)

    def demand(self, rho: float, respect_min_rate: bool) -> tuple[float, bool, bool]:
        """Bandwidth demanded at dual rho: (hz, clamped_min, saturated)."""
        target_slope = rho / self.sse
        curve = self.profile.curve
        try:
            if respect_min_rate:
                rate, clamped = curve.inverse_slope(target_slope)
            else:
                rate, clamped = inverse_slope_extended(curve, target_slope), False
        except CurveDomainError:
            # Below the final segment slope of a tabulated curve: saturated.
            return self.b_top, False, True
        return rate / self.sse, clamped, False


def _check_common(users: list[UserProfile], total_bandwidth_hz: float) -> None:
    if not users:
        raise ValueError("user list is empty")
    ids = [u.user_id for u in users]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate user ids")
    if not (math.isfinite(total_bandwidth_hz) and total_bandwidth_hz > 0.0):
        raise ValueError(f"total bandwidth must be finite and > 0, got {total_bandwidth_hz!r}")


def _entry(
    profile: UserProfile,
    bandwidth_hz: float,
    coherence_time_s: float,
    *,
    clamped: bool = False,
    saturated: bool = False,
    below_common: bool = False,
    rate_bps: float | None = None,
) -> UserAllocation:
    rate = profile.derived.sse * bandwidth_hz if rate_bps is None else rate_bps
    theta = (
        qos_exponent_for_rate(profile.target, rate, coherence_time_s)
        if rate > 0.0
        else math.inf
    )
    servable = rate >= profile.curve.min_rate_bps * (1.0 - 1e-9)
    return UserAllocation(
        user_id=profile.user_id,
        bandwidth_hz=bandwidth_hz,
        rate_bps=rate,
        qos_exponent=theta,
        quality=_quality_for_report(profile.curve, rate),
        clamped_min=clamped,
        saturated=saturated,
        below_common=below_common,
        servable=servable,
    )


def allocate_sum_quality(
    users: list[UserProfile],
    total_bandwidth_hz: float,
    *,
    coherence_time_s: float = DEFAULT_COHERENCE_TIME_S,
    respect_min_rate: bool = True,
) -> AllocationResult:
    """Sum-quality-maximizing split of the bandwidth budget.

    With respect_min_rate (the default), users whose stationarity rate falls
    below their minimum representation are pinned there and flagged; the
    remaining budget is redistributed through the dual search.  With it off,
    the pure stationarity point is returned even below minimum rates (used
    by admission, where sub-minimum operating points must be detected).

    Raises InfeasibleAllocationError when the minimum bandwidths alone
    exceed the budget, and AllocationError when every curve saturates before
    the budget is spent (exact budget equality is then impossible).
    """
    _check_common(users, total_bandwidth_hz)
    B = total_bandwidth_hz

    if len(users) == 1:
        u = users[0]
        rate = u.derived.sse * B
        if respect_min_rate and rate < u.curve.min_rate_bps:
            raise InfeasibleAllocationError(
                f"budget gives user {u.user_id!r} rate {rate:g} below its minimum "
                f"representation {u.curve.min_rate_bps:g}",
                deficit_hz=u.curve.min_rate_bps / u.derived.sse - B,
            )
        if rate > u.curve.max_rate_bps:
            raise AllocationError(
                f"budget {B:g} Hz exceeds the saturating bandwidth "
                f"{u.curve.max_rate_bps / u.derived.sse:g} Hz of user {u.user_id!r}"
            )
        rho = u.curve.slope(rate) * u.derived.sse
        return AllocationResult(
            POLICY_SUM_QUALITY,
            (_entry(u, B, coherence_time_s),),
            B,
            dual_price=rho,
        )

    su: list[_SumUser] = []
    for u in users:
        sse = u.derived.sse
        min_rate = u.curve.min_rate_bps
        b_min = min_rate / sse
        rho_clamp = math.inf if min_rate == 0.0 else u.curve.slope(min_rate) * sse
        su.append(_SumUser(u, sse, b_min, rho_clamp, u.curve.max_rate_bps / sse))

    sum_bmin = sum(s.b_min for s in su)
    if respect_min_rate and sum_bmin > B * (1.0 + _REL_EPS):
        raise InfeasibleAllocationError(
            f"minimum bandwidths {sum_bmin:g} Hz exceed the budget {B:g} Hz",
            deficit_hz=sum_bmin - B,
        )
    sum_btop = sum(s.b_top for s in su)
    if sum_btop < B * (1.0 - _REL_EPS):
        raise AllocationError(
            f"budget {B:g} Hz exceeds the saturating total bandwidth {sum_btop:g} Hz"
        )

    def demand_all(rho: float) -> tuple[list[float], list[tuple[bool, bool]], float]:
        bands, flags = [], []
        for s in su:
            b, clamped, saturated = s.demand(rho, respect_min_rate)
            if respect_min_rate and clamped:
                b = s.b_min
            bands.append(b)
            flags.append((clamped, saturated))
        return bands, flags, sum(bands)

    # Upper dual: every user pinned at its floor (or vanishing, if no floor).
    finite_clamps = [s.rho_clamp for s in su if math.isfinite(s.rho_clamp)]
    rho_hi = 2.0 * max(finite_clamps) if finite_clamps else 1.0
    _, _, g_hi = demand_all(rho_hi)
    for _ in range(200):
        if g_hi <= B:
            break
        rho_hi *= 2.0
        _, _, g_hi = demand_all(rho_hi)
    else:
        raise AllocationError("could not bracket the dual from above")

    # Lower dual: from each user holding the full band (or its saturation).
    rho_lo = min(
        s.profile.curve.slope(min(s.sse * B, s.profile.curve.max_rate_bps)) * s.sse
        for s in su
    )
    _, _, g_lo = demand_all(rho_lo)
    for _ in range(400):
        if g_lo >= B:
            break
        rho_lo *= 0.5
        _, _, g_lo = demand_all(rho_lo)
    else:
        raise AllocationError("could not bracket the dual from below")
    assert g_lo + _REL_EPS * B >= g_hi, "total demand must be non-increasing in the dual"

    root = bisect_root(
        lambda rho: demand_all(rho)[2] - B,
        rho_lo,
        rho_hi,
        f_lo=g_lo - B,
        f_hi=g_hi - B,
        residual_tol=0.0,
        x_rtol=1e-14,
        max_iter=200,
    )

    bands_hi, flags_hi, total_hi = demand_all(root.hi)
    bands_lo, _, _ = demand_all(root.lo)
    deficit = B - total_hi
    windows = [max(blo - bhi, 0.0) for blo, bhi in zip(bands_lo, bands_hi)]
    wsum = sum(windows)
    if deficit > 0.0:
        if wsum <= 0.0:
            raise AllocationError(
                f"residual budget {deficit:g} Hz with no adjustable user (numerical)"
            )
        bands = [b + deficit * w / wsum for b, w in zip(bands_hi, windows)]
    else:
        bands = list(bands_hi)
    # Absorb float dust so the budget holds to machine precision.
    dust = B - sum(bands)
    if bands and dust != 0.0:
        k = max(range(len(bands)), key=lambda i: windows[i])
        bands[k] += dust

    entries = tuple(
        _entry(s.profile, b, coherence_time_s, clamped=fl[0], saturated=fl[1])
        for s, b, fl in zip(su, bands, flags_hi)
    )
    return AllocationResult(POLICY_SUM_QUALITY, entries, B, dual_price=root.hi)


def kkt_residual(result: AllocationResult, users: list[UserProfile]) -> float:
    """Stationarity residual max_k |slope(R_k) * sse_k - rho| / rho.

    Users pinned at a representation limit (either end) are excluded; they
    satisfy the complementary-slackness side of the conditions instead.
    """
    if result.policy != POLICY_SUM_QUALITY or result.dual_price is None:
        raise ValueError("KKT residual is defined for sum-quality results")
    by_id = {u.user_id: u for u in users}
    rho = result.dual_price
    worst = 0.0
    for e in result.entries:
        if e.clamped_min or e.saturated or not e.servable:
            continue
        u = by_id[e.user_id]
        s = u.curve.slope(e.rate_bps) * u.derived.sse
        worst = max(worst, abs(s - rho) / rho)
    return worst


def allocate_fairness(
    users: list[UserProfile],
    total_bandwidth_hz: float,
    *,
    coherence_time_s: float = DEFAULT_COHERENCE_TIME_S,
    respect_min_rate: bool = True,
) -> AllocationResult:
    """Max-min-quality split: every served user lands on a common quality q.

    The common q solves sum_k Q_k^{-1}(q)/sse_k = B by bisection.  Users
    whose own minimum-representation quality exceeds the solved q are
    flagged below_common and held at their minimum bandwidth (the scheduler
    is expected to have filtered them out beforehand).
    """
    _check_common(users, total_bandwidth_hz)
    B = total_bandwidth_hz

    sses = [u.derived.sse for u in users]
    b_mins = [u.curve.min_rate_bps / s for u, s in zip(users, sses)]
    if respect_min_rate:
        sum_bmin = sum(b_mins)
        if sum_bmin > B * (1.0 + _REL_EPS):
            raise InfeasibleAllocationError(
                f"minimum bandwidths {sum_bmin:g} Hz exceed the budget {B:g} Hz",
                deficit_hz=sum_bmin - B,
            )

    def rate_for(u: UserProfile, q: float) -> float:
        if respect_min_rate:
            if q <= u.curve.min_quality:
                return u.curve.min_rate_bps
            try:
                return u.curve.inverse_quality(q)
            except CurveDomainError:
                return math.inf  # q above this curve's reach
        try:
            return inverse_quality_extended(u.curve, q)
        except CurveDomainError:
            return math.inf

    def total_band(q: float) -> float:
        return sum(rate_for(u, q) / s for u, s in zip(users, sses))

    q_hi = min(
        u.curve.quality(min(u.derived.sse * B, u.curve.max_rate_bps)) for u in users
    )
    f_hi = total_band(q_hi)
    if f_hi < B * (1.0 - 1e-9):
        raise AllocationError(
            f"budget {B:g} Hz exceeds the bandwidth needed to reach the lowest "
            f"curve top ({f_hi:g} Hz at quality {q_hi:g})"
        )

    span = max(1.0, abs(q_hi) * 0.5)
    q_lo = q_hi - span
    f_lo = total_band(q_lo)
    for _ in range(300):
        if f_lo <= B:
            break
        span *= 2.0
        q_lo = q_hi - span
        f_lo = total_band(q_lo)
    else:
        raise AllocationError("could not bracket the common quality from below")

    root = bisect_root(
        lambda q: total_band(q) - B,
        q_lo,
        q_hi,
        f_lo=f_lo - B,
        f_hi=f_hi - B,
        residual_tol=_BUDGET_RTOL * B,
        x_rtol=1e-15,
        max_iter=400,
    )
    if not root.converged:
        raise AllocationError(f"fairness budget residual {root.fx:g} did not converge")
    q_star = root.x

    entries = []
    for u in users:
        rate = rate_for(u, q_star)
        below = q_star < u.curve.min_quality - abs(u.curve.min_quality) * 1e-12 - 1e-300
        entries.append(
            _entry(
                u,
                rate / u.derived.sse,
                coherence_time_s,
                clamped=below and respect_min_rate,
                below_common=below,
                rate_bps=rate,
            )
        )
    return AllocationResult(
        POLICY_FAIRNESS, tuple(entries), B, common_quality=q_star
    )
