"""Maximal-subset scheduling and admission of new users.

Scheduling is a unit-value knapsack: every user is worth one, and costs its
minimum bandwidth b_min = R_min / sse (the cheapest way to keep its delay
target while using an existing representation).  Sorting by b_min and taking
the longest affordable prefix is therefore exact, not a heuristic.  Under
the fairness policy the sort key becomes the quality of the minimum
representation: a user can only be served if everyone with a lower quality
floor is served too, so only the K+1 prefixes need to be checked.

Admission evaluates whether a newcomer fits a running system without
breaking anyone's delay target.  The newcomer's operating point is taken
from a re-solve of the allocation over the enlarged set at the pure
stationarity point (no minimum-rate pinning), and the incumbents' rates are
scaled by the bandwidth fraction left to them; both the newcomer's and every
incumbent's minimum representations must remain reachable.

Brute-force counterparts (exhaustive subset search, prefix enumeration)
are included for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

from .allocator import (
    POLICY_FAIRNESS,
    POLICY_SUM_QUALITY,
    AllocationResult,
    UserProfile,
    allocate_fairness,
    allocate_sum_quality,
)
from .errors import CurveDomainError
from .qos import DEFAULT_COHERENCE_TIME_S

_REL_EPS = 1e-9


def min_bandwidth(user: UserProfile) -> float:
    """Smallest bandwidth on which the user's delay target supports R_min."""
    return user.curve.min_rate_bps / user.derived.sse


@dataclass(frozen=True)
class ScheduleResult:
    policy: str
    selected_ids: tuple[str, ...]          # in scheduling order
    b_min_hz: dict[str, float]             # minimum bandwidth per candidate
    q_min: dict[str, float] | None         # fairness sort key per candidate
    n_star: int
    residual_bandwidth_hz: float


def schedule_sum_quality(users: list[UserProfile], total_bandwidth_hz: float) -> ScheduleResult:
    """Largest user subset whose minimum bandwidths fit the budget."""
    if not users:
        raise ValueError("user list is empty")
    b_min = {u.user_id: min_bandwidth(u) for u in users}
    order = sorted(users, key=lambda u: (b_min[u.user_id], u.user_id))
    selected: list[str] = []
    used = 0.0
    for u in order:
        if used + b_min[u.user_id] <= total_bandwidth_hz:
            used += b_min[u.user_id]
            selected.append(u.user_id)
        else:
            break
    return ScheduleResult(
        POLICY_SUM_QUALITY,
        tuple(selected),
        b_min,
        None,
        len(selected),
        total_bandwidth_hz - used,
    )


def _fairness_prefix_cost(prefix: list[UserProfile], q_level: float) -> float:
    """Bandwidth to hold every prefix user at quality q_level (inf if out of reach)."""
    total = 0.0
    for u in prefix:
        if q_level <= u.curve.min_quality:
            rate = u.curve.min_rate_bps
        else:
            try:
                rate = u.curve.inverse_quality(q_level)
            except CurveDomainError:
                return math.inf
        total += rate / u.derived.sse
    return total


def schedule_fairness(users: list[UserProfile], total_bandwidth_hz: float) -> ScheduleResult:
    """Largest prefix of the quality-floor order servable at a common quality.

    Serving N users forces the common quality up to the N-th smallest
    minimum-representation quality; the prefix cost at that level must fit.
    """
    if not users:
        raise ValueError("user list is empty")
    q_min = {u.user_id: u.curve.min_quality for u in users}
    b_min = {u.user_id: min_bandwidth(u) for u in users}
    order = sorted(users, key=lambda u: (q_min[u.user_id], u.user_id))
    best_n = 0
    best_cost = 0.0
    for n in range(1, len(order) + 1):
        cost = _fairness_prefix_cost(order[:n], q_min[order[n - 1].user_id])
        if cost <= total_bandwidth_hz:
            best_n, best_cost = n, cost
    return ScheduleResult(
        POLICY_FAIRNESS,
        tuple(u.user_id for u in order[:best_n]),
        b_min,
        q_min,
        best_n,
        total_bandwidth_hz - best_cost,
    )


def brute_force_max_subset(users: list[UserProfile], total_bandwidth_hz: float) -> int:
    """Exhaustive max-cardinality subset with sum of b_min within budget."""
    if len(users) > 20:
        raise ValueError("exhaustive search limited to 20 users")
    costs = [min_bandwidth(u) for u in users]
    for size in range(len(users), 0, -1):
        for combo in combinations(costs, size):
            if sum(combo) <= total_bandwidth_hz:
                return size
    return 0


def brute_force_fairness_prefix(users: list[UserProfile], total_bandwidth_hz: float) -> int:
    """Direct evaluation of all K+1 prefix options of the quality-floor order."""
    order = sorted(users, key=lambda u: (u.curve.min_quality, u.user_id))
    best = 0
    for n in range(len(order) + 1):
        if n == 0:
            feasible = True
        else:
            cost = _fairness_prefix_cost(order[:n], order[n - 1].curve.min_quality)
            feasible = cost <= total_bandwidth_hz
        if feasible:
            best = max(best, n)
    return best


@dataclass(frozen=True)
class AdmissionDecision:
    admit: bool
    new_user_rate_bps: float
    post_rates_bps: dict[str, float]       # incumbents after admission
    failure_reason: str | None = None
    common_quality_final: float | None = None  # fairness only


def _check_existing(existing: AllocationResult, policy: str) -> None:
    if existing.policy != policy:
        raise ValueError(f"existing allocation has policy {existing.policy!r}, expected {policy!r}")
    used = existing.bandwidth_used_hz()
    if abs(used - existing.total_bandwidth_hz) > 1e-6 * existing.total_bandwidth_hz:
        raise ValueError(
            f"existing allocation violates its budget: uses {used:g} of {existing.total_bandwidth_hz:g} Hz"
        )


def admit_sum_quality(
    existing: AllocationResult,
    existing_profiles: list[UserProfile],
    new_user: UserProfile,
    total_bandwidth_hz: float,
    *,
    coherence_time_s: float = DEFAULT_COHERENCE_TIME_S,
) -> AdmissionDecision:
    """Admission test under the sum-quality policy.

    The newcomer's stationarity rate (and hence bandwidth share) comes from
    one unconstrained re-solve over the enlarged set.  Admission requires
    (1) every incumbent, with its rate scaled by the remaining bandwidth
    fraction, stays at or above its minimum representation, and (2) the
    newcomer's rate reaches its own minimum.
    """
    _check_existing(existing, POLICY_SUM_QUALITY)
    B = total_bandwidth_hz
    enlarged = list(existing_profiles) + [new_user]
    re_alloc = allocate_sum_quality(
        enlarged, B, coherence_time_s=coherence_time_s, respect_min_rate=False
    )
    new_entry = re_alloc.entry(new_user.user_id)
    rate_new = new_entry.rate_bps
    share = new_entry.bandwidth_hz / B
    scale = 1.0 - share

    post_rates = {
        e.user_id: existing.entry(e.user_id).rate_bps * scale
        for e in existing.entries
    }
    reason = None
    for u in existing_profiles:
        if post_rates[u.user_id] < u.curve.min_rate_bps * (1.0 - _REL_EPS):
            reason = (
                f"existing user {u.user_id!r} would fall below its minimum "
                f"representation ({post_rates[u.user_id]:g} < {u.curve.min_rate_bps:g} bps)"
            )
            break
    if reason is None and rate_new < new_user.curve.min_rate_bps * (1.0 - _REL_EPS):
        reason = (
            f"new user rate {rate_new:g} bps below its minimum representation "
            f"{new_user.curve.min_rate_bps:g} bps"
        )
    return AdmissionDecision(
        admit=reason is None,
        new_user_rate_bps=rate_new,
        post_rates_bps=post_rates,
        failure_reason=reason,
    )


def admit_fairness(
    existing: AllocationResult,
    existing_profiles: list[UserProfile],
    new_user: UserProfile,
    total_bandwidth_hz: float,
    *,
    coherence_time_s: float = DEFAULT_COHERENCE_TIME_S,
) -> AdmissionDecision:
    """Admission test under the fairness policy.

    The post-admission common quality is re-solved over the enlarged set;
    the newcomer's bandwidth at that quality drives the incumbent scaling
    condition, and the newcomer must reach its minimum representation at the
    final quality.
    """
    _check_existing(existing, POLICY_FAIRNESS)
    B = total_bandwidth_hz
    enlarged = list(existing_profiles) + [new_user]
    re_alloc = allocate_fairness(
        enlarged, B, coherence_time_s=coherence_time_s, respect_min_rate=False
    )
    q_final = re_alloc.common_quality
    new_entry = re_alloc.entry(new_user.user_id)
    rate_new = new_entry.rate_bps
    share = new_entry.bandwidth_hz / B

    reason = None
    for u in existing_profiles:
        r_old = existing.entry(u.user_id).rate_bps
        if r_old * (1.0 - share) < u.curve.min_rate_bps * (1.0 - _REL_EPS):
            reason = (
                f"existing user {u.user_id!r} would fall below its minimum representation"
            )
            break
    if reason is None and rate_new < new_user.curve.min_rate_bps * (1.0 - _REL_EPS):
        reason = "new user below minimum representation at the final common quality"
    post_rates = {e.user_id: e.rate_bps for e in re_alloc.entries if e.user_id != new_user.user_id}
    return AdmissionDecision(
        admit=reason is None,
        new_user_rate_bps=rate_new,
        post_rates_bps=post_rates,
        failure_reason=reason,
        common_quality_final=q_final,
    )
