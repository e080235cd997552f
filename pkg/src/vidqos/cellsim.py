"""Single-cell multiuser drop simulation and method comparison.

Users fall in a disc as a Poisson point process; distance sets the average
SNR through a log-distance pathloss budget,

    snr_dB = 10 log10(Pt) - K_dB - 10 * delta * log10(d) - 10 log10(N0 * B_ref),

with Pt in watts, d in metres.  The noise-bandwidth term uses a fixed
reference bandwidth B_ref (default: the whole band) so a user's SNR
statistics do not move when the allocator re-partitions the band; this
decoupling is recorded in the report metadata.  Transmit power is treated
as per-user link power by default (equal-split mode divides it by the user
count).

Four scheduler/allocator combinations are compared on each drop:

  maxsub_sumq   maximal-subset scheduling + sum-quality allocation
  maxsub_fair   maximal-subset (quality-floor prefix) + fairness allocation
  maxsnr_eq     QoS-aware max-SNR scheduling + equal bandwidth split
  maxsnr_sumq   QoS-aware max-SNR scheduling + sum-quality allocation

"QoS-aware max-SNR" keeps the highest-SNR users that can all still meet
their delay targets under the method's own allocation rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .allocator import (
    AllocationResult,
    UserProfile,
    allocate_fairness,
    allocate_sum_quality,
)
from .errors import BoundaryNotInGridError, QosInfeasibleError
from .fading import Rayleigh
from .qos import DEFAULT_COHERENCE_TIME_S, QosTarget, derive_qos
from .ratequality import RateQualityCurve
from .scheduler import min_bandwidth, schedule_fairness, schedule_sum_quality

METHODS = ("maxsub_sumq", "maxsub_fair", "maxsnr_eq", "maxsnr_sumq")


@dataclass(frozen=True)
class QosClass:
    name: str
    target: QosTarget
    fraction: float


@dataclass(frozen=True)
class DmosMap:
    """Affine quality-to-DMOS map for spread reporting. Illustrative only:
    the coefficients are configuration, not a fitted perceptual model."""

    scale: float = -2.0
    offset: float = 20.0

    def apply(self, quality: float) -> float:
        return self.offset + self.scale * quality


@dataclass(frozen=True)
class CellScenario:
    cell_radius_m: float
    user_density_per_m2: float
    tx_power_w: float
    pathloss_const_db: float
    pathloss_exponent: float
    noise_psd_w_per_hz: float
    total_bandwidth_hz: float
    qos_mix: tuple[QosClass, ...]
    curve_catalog: tuple[tuple[RateQualityCurve, float], ...]  # (curve, weight)
    rng_seed: int = 0
    ref_bandwidth_hz: float | None = None    # None: use the whole band
    min_distance_m: float = 1.0
    per_user_power: bool = True              # False: split tx power across drawn users

    def __post_init__(self):
        if self.pathloss_exponent <= 2.0:
            raise ValueError("pathloss exponent must exceed 2")
        for name, v in (
            ("cell_radius_m", self.cell_radius_m),
            ("tx_power_w", self.tx_power_w),
            ("noise_psd_w_per_hz", self.noise_psd_w_per_hz),
            ("total_bandwidth_hz", self.total_bandwidth_hz),
            ("min_distance_m", self.min_distance_m),
        ):
            if not v > 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.user_density_per_m2 < 0.0:
            raise ValueError("user density must be >= 0")
        if not self.qos_mix or not self.curve_catalog:
            raise ValueError("need at least one QoS class and one curve")
        total = sum(c.fraction for c in self.qos_mix)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"QoS class fractions sum to {total}, expected 1")
        if any(w <= 0 for _, w in self.curve_catalog):
            raise ValueError("curve weights must be > 0")

    @property
    def reference_bandwidth_hz(self) -> float:
        return self.ref_bandwidth_hz if self.ref_bandwidth_hz else self.total_bandwidth_hz


def replace_density(scn: CellScenario, density_per_m2: float) -> CellScenario:
    """Same cell with a different PPP intensity (used by density sweeps)."""
    return replace(scn, user_density_per_m2=density_per_m2)


def mean_snr_db(scn: CellScenario, distance_m: float, n_users_for_power: int = 1) -> float:
    """Link-budget average SNR at a given distance (dB)."""
    d = max(distance_m, scn.min_distance_m)
    power = scn.tx_power_w if scn.per_user_power else scn.tx_power_w / max(n_users_for_power, 1)
    return (
        10.0 * math.log10(power)
        - scn.pathloss_const_db
        - 10.0 * scn.pathloss_exponent * math.log10(d)
        - 10.0 * math.log10(scn.noise_psd_w_per_hz * scn.reference_bandwidth_hz)
    )


@dataclass
class PlacedUser:
    user_id: str
    x_m: float
    y_m: float
    distance_m: float
    qos_class: str
    curve_index: int
    snr_db: float
    profile: UserProfile | None   # None: delay target unreachable on this channel


def draw_users(scn: CellScenario, rng: np.random.Generator | None = None) -> list[PlacedUser]:
    """One Poisson drop of users with per-user QoS solves.

    Deterministic for a fixed scenario seed.  Users whose delay target is
    unreachable at their SNR (solver hits the exponent guard) keep a None
    profile and can never be scheduled.
    """
    if rng is None:
        rng = np.random.default_rng(scn.rng_seed)
    area = math.pi * scn.cell_radius_m**2
    n = int(rng.poisson(scn.user_density_per_m2 * area))
    if n == 0:
        return []
    radii = scn.cell_radius_m * np.sqrt(rng.uniform(size=n))
    angles = rng.uniform(0.0, 2.0 * math.pi, size=n)
    class_fracs = np.array([c.fraction for c in scn.qos_mix])
    class_idx = rng.choice(len(scn.qos_mix), size=n, p=class_fracs / class_fracs.sum())
    curve_w = np.array([w for _, w in scn.curve_catalog])
    curve_idx = rng.choice(len(scn.curve_catalog), size=n, p=curve_w / curve_w.sum())

    users: list[PlacedUser] = []
    width = len(str(n - 1))
    for i in range(n):
        d = float(radii[i])
        qc = scn.qos_mix[int(class_idx[i])]
        curve = scn.curve_catalog[int(curve_idx[i])][0]
        snr = mean_snr_db(scn, d, n)
        dist = Rayleigh(10.0 ** (snr / 10.0))
        uid = f"u{i:0{width}d}"
        try:
            derived = derive_qos(qc.target, dist)
            profile = UserProfile(uid, qc.target, dist, curve, derived)
        except QosInfeasibleError:
            profile = None
        users.append(
            PlacedUser(
                user_id=uid,
                x_m=float(radii[i] * np.cos(angles[i])),
                y_m=float(radii[i] * np.sin(angles[i])),
                distance_m=d,
                qos_class=qc.name,
                curve_index=int(curve_idx[i]),
                snr_db=snr,
                profile=profile,
            )
        )
    return users


@dataclass
class MethodResult:
    method: str
    served_ids: tuple[str, ...]
    allocations: dict[str, tuple[float, float, float]]  # id -> (bandwidth, rate, quality)
    users_supported: int
    quality_stddev: float
    quality_stddev_dmos: float
    coverage_radius_m: dict[str, float | None]


@dataclass
class SimReport:
    users: list[PlacedUser]
    methods: dict[str, MethodResult]
    metadata: dict


def _method_result(
    method: str,
    placed: list[PlacedUser],
    alloc_by_id: dict[str, tuple[float, float, float]],
    dmos: DmosMap,
) -> MethodResult:
    served = tuple(sorted(alloc_by_id))
    quals = np.array([alloc_by_id[u][2] for u in served]) if served else np.array([])
    dmos_vals = np.array([dmos.apply(q) for q in quals]) if served else np.array([])
    coverage: dict[str, float | None] = {}
    by_id = {p.user_id: p for p in placed}
    classes = {p.qos_class for p in placed}
    for cls in sorted(classes):
        dists = [by_id[u].distance_m for u in served if by_id[u].qos_class == cls]
        coverage[cls] = max(dists) if dists else None
    return MethodResult(
        method=method,
        served_ids=served,
        allocations=alloc_by_id,
        users_supported=len(served),
        quality_stddev=float(np.std(quals)) if served else 0.0,
        quality_stddev_dmos=float(np.std(dmos_vals)) if served else 0.0,
        coverage_radius_m=coverage,
    )


def _alloc_map(result: AllocationResult) -> dict[str, tuple[float, float, float]]:
    return {e.user_id: (e.bandwidth_hz, e.rate_bps, e.quality) for e in result.entries}


def _max_snr_order(placed: list[PlacedUser], feasible_ids: set[str]) -> list[PlacedUser]:
    pool = [p for p in placed if p.user_id in feasible_ids]
    return sorted(pool, key=lambda p: (-p.snr_db, p.user_id))


def _max_snr_equal_split(
    placed: list[PlacedUser], feasible_ids: set[str], B: float
) -> dict[str, tuple[float, float, float]]:
    """Longest top-SNR prefix where an equal split keeps everyone above R_min."""
    order = _max_snr_order(placed, feasible_ids)
    best_n = 0
    worst_b_min = 0.0
    for n, p in enumerate(order, start=1):
        worst_b_min = max(worst_b_min, min_bandwidth(p.profile))
        if B / n >= worst_b_min:
            best_n = n
    out: dict[str, tuple[float, float, float]] = {}
    if best_n == 0:
        return out
    share = B / best_n
    for p in order[:best_n]:
        prof = p.profile
        rate = min(prof.derived.sse * share, prof.curve.max_rate_bps)
        out[p.user_id] = (share, rate, prof.curve.quality(rate))
    return out


def _max_snr_prefix_for_sumq(
    placed: list[PlacedUser], feasible_ids: set[str], B: float
) -> list[UserProfile]:
    """Longest top-SNR prefix whose minimum bandwidths fit the budget."""
    order = _max_snr_order(placed, feasible_ids)
    chosen: list[UserProfile] = []
    used = 0.0
    for p in order:
        b = min_bandwidth(p.profile)
        if used + b <= B:
            used += b
            chosen.append(p.profile)
        else:
            break
    return chosen


def run_comparison(
    placed: list[PlacedUser],
    total_bandwidth_hz: float,
    *,
    coherence_time_s: float = DEFAULT_COHERENCE_TIME_S,
    dmos: DmosMap = DmosMap(),
) -> SimReport:
    """Evaluate the four scheduler/allocator combinations on one drop.

    Candidates are users whose delay target is reachable at all and whose
    minimum bandwidth fits the whole band; anyone else cannot be served by
    any method even alone, so all four methods see the same pool.
    """
    B = total_bandwidth_hz
    feasible = [
        p.profile
        for p in placed
        if p.profile is not None and min_bandwidth(p.profile) <= B
    ]
    feasible_ids = {u.user_id for u in feasible}
    methods: dict[str, MethodResult] = {}

    # maximal subset + sum quality
    if feasible:
        sched = schedule_sum_quality(feasible, B)
        sel = [u for u in feasible if u.user_id in set(sched.selected_ids)]
        amap = _alloc_map(allocate_sum_quality(sel, B, coherence_time_s=coherence_time_s)) if sel else {}
    else:
        amap = {}
    methods["maxsub_sumq"] = _method_result("maxsub_sumq", placed, amap, dmos)

    # maximal subset + fairness
    if feasible:
        sched = schedule_fairness(feasible, B)
        sel = [u for u in feasible if u.user_id in set(sched.selected_ids)]
        amap = _alloc_map(allocate_fairness(sel, B, coherence_time_s=coherence_time_s)) if sel else {}
    else:
        amap = {}
    methods["maxsub_fair"] = _method_result("maxsub_fair", placed, amap, dmos)

    # max-SNR + equal split
    methods["maxsnr_eq"] = _method_result(
        "maxsnr_eq", placed, _max_snr_equal_split(placed, feasible_ids, B), dmos
    )

    # max-SNR + sum quality
    sel = _max_snr_prefix_for_sumq(placed, feasible_ids, B)
    amap = _alloc_map(allocate_sum_quality(sel, B, coherence_time_s=coherence_time_s)) if sel else {}
    methods["maxsnr_sumq"] = _method_result("maxsnr_sumq", placed, amap, dmos)

    return SimReport(
        users=placed,
        methods=methods,
        metadata={
            "total_bandwidth_hz": B,
            "snr_reference_bandwidth_hz_note": (
                "average SNR computed at a fixed reference bandwidth, "
                "decoupled from the allocated share"
            ),
        },
    )


def service_boundary_snr(
    target: QosTarget,
    min_rate_bps: float,
    bandwidth_hz: float,
    *,
    snr_min_db: float = -30.0,
    snr_max_db: float = 30.0,
    tol_db: float = 0.01,
) -> float:
    """Minimum Rayleigh average SNR (dB) at which the user is servable.

    Servable means the delay target supports the minimum representation on
    the given bandwidth.  Returns snr_min_db when the whole grid is
    servable; raises BoundaryNotInGridError when none of it is.
    """

    def margin(db: float) -> float:
        dist = Rayleigh(10.0 ** (db / 10.0))
        try:
            derived = derive_qos(target, dist)
        except QosInfeasibleError:
            return -min_rate_bps
        return derived.sse * bandwidth_hz - min_rate_bps

    if min_rate_bps <= 0.0:
        return snr_min_db
    lo, hi = snr_min_db, snr_max_db
    if margin(lo) >= 0.0:
        return snr_min_db
    if margin(hi) < 0.0:
        raise BoundaryNotInGridError(
            f"user not servable anywhere in [{snr_min_db}, {snr_max_db}] dB"
        )
    # servability is monotone in the average SNR, so plain dB bisection
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if margin(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def write_users_csv(report: SimReport, path: str | Path) -> None:
    """Per-user drop table; one row per placed user, fixed column order."""
    cols = ["user_id", "x_m", "y_m", "distance_m", "qos_class", "curve_index",
            "snr_db", "qos_feasible"]
    for m in METHODS:
        cols += [f"served_{m}", f"bandwidth_hz_{m}", f"rate_bps_{m}", f"quality_{m}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for p in report.users:
            row = [
                p.user_id,
                repr(p.x_m),
                repr(p.y_m),
                repr(p.distance_m),
                p.qos_class,
                p.curve_index,
                repr(p.snr_db),
                int(p.profile is not None),
            ]
            for m in METHODS:
                alloc = report.methods[m].allocations.get(p.user_id)
                if alloc is None:
                    row += [0, "", "", ""]
                else:
                    row += [1, repr(alloc[0]), repr(alloc[1]), repr(alloc[2])]
            w.writerow(row)


def write_summary_csv(rows: list[dict], path: str | Path) -> None:
    """Density-sweep summary; one row per (method, density)."""
    cols = ["method", "density_per_m2", "realizations", "users_supported_mean",
            "users_supported_std", "quality_stddev_mean", "quality_stddev_dmos_mean"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
