"""Concave increasing rate-to-quality mappings.

Three families, all strictly increasing and concave on [min_rate, max_rate):

  LogCurve            Q(R) = gain * ln(R / ref_rate)
  ShiftedPowerCurve   Q(R) = max_quality - scale * (R / ref_rate)^(exponent-1)
  TabulatedCurve      piecewise-linear through measured (rate, quality) knots

Quality is oriented so that larger is better everywhere in this package;
reduced-reference distortion scores (lower = better) enter negated.

Each curve carries the minimum-rate representation min_rate_bps: below it no
encoding of the sequence exists, so allocation treats operating points under
min_rate as unservable rather than evaluating the curve there.  Tabulated
curves additionally end at their top knot (max_rate); the parametric
families are unbounded.

Slope conventions for the piecewise-linear family: the slope at a knot is
the right-hand segment's slope (at the top knot, the last segment's).  The
slope inverse at a target falling strictly between two adjacent segment
slopes returns the knot between them, which is the subdifferential condition
a concave piecewise-linear utility contributes to the allocator's
stationarity equation.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .errors import CurveDomainError, CurveError

# Tolerated relative overshoot when checking rate/quality domain edges, so a
# caller landing on a boundary through float arithmetic is not rejected.
_EDGE_RTOL = 1e-9


def _check_min_rate(min_rate_bps: float) -> None:
    if not (math.isfinite(min_rate_bps) and min_rate_bps >= 0.0):
        raise CurveError(f"min_rate_bps must be finite and >= 0, got {min_rate_bps!r}")


@dataclass(frozen=True)
class LogCurve:
    """Q(R) = gain * ln(R / ref_rate_bps); unbounded, slope gain/R."""

    gain: float
    ref_rate_bps: float
    min_rate_bps: float

    def __post_init__(self):
        if not (self.gain > 0.0 and self.ref_rate_bps > 0.0):
            raise CurveError("LogCurve requires gain > 0 and ref_rate_bps > 0")
        _check_min_rate(self.min_rate_bps)

    @property
    def max_rate_bps(self) -> float:
        return math.inf

    @property
    def min_quality(self) -> float:
        return self.quality(self.min_rate_bps) if self.min_rate_bps > 0.0 else -math.inf

    @property
    def sup_quality(self) -> float:
        return math.inf

    def quality(self, rate_bps: float) -> float:
        _require_at_least_min(rate_bps, self.min_rate_bps)
        if rate_bps == 0.0:
            return -math.inf
        return self.gain * math.log(rate_bps / self.ref_rate_bps)

    def slope(self, rate_bps: float) -> float:
        _require_at_least_min(rate_bps, self.min_rate_bps)
        return math.inf if rate_bps == 0.0 else self.gain / rate_bps

    def inverse_slope(self, target_slope: float) -> tuple[float, bool]:
        rate = _inverse_slope_extended_log(self, target_slope)
        return _clamp_min(rate, self.min_rate_bps)

    def inverse_quality(self, target_quality: float) -> float:
        _require_quality_range(target_quality, self.min_quality, self.sup_quality)
        return self.ref_rate_bps * math.exp(target_quality / self.gain)


@dataclass(frozen=True)
class ShiftedPowerCurve:
    """Q(R) = max_quality - scale * (R/ref_rate_bps)^(exponent-1).

    exponent in (0,1) makes the subtracted term decreasing and convex, so Q
    is increasing and concave, saturating toward max_quality (never reached).
    """

    max_quality: float
    scale: float
    exponent: float
    ref_rate_bps: float
    min_rate_bps: float

    def __post_init__(self):
        if not (self.scale > 0.0 and 0.0 < self.exponent < 1.0 and self.ref_rate_bps > 0.0):
            raise CurveError(
                "ShiftedPowerCurve requires scale > 0, exponent in (0,1), ref_rate_bps > 0"
            )
        _check_min_rate(self.min_rate_bps)

    @property
    def max_rate_bps(self) -> float:
        return math.inf

    @property
    def min_quality(self) -> float:
        return self.quality(self.min_rate_bps) if self.min_rate_bps > 0.0 else -math.inf

    @property
    def sup_quality(self) -> float:
        return self.max_quality

    def quality(self, rate_bps: float) -> float:
        _require_at_least_min(rate_bps, self.min_rate_bps)
        if rate_bps == 0.0:
            return -math.inf
        return self.max_quality - self.scale * (rate_bps / self.ref_rate_bps) ** (self.exponent - 1.0)

    def slope(self, rate_bps: float) -> float:
        _require_at_least_min(rate_bps, self.min_rate_bps)
        if rate_bps == 0.0:
            return math.inf
        return (
            self.scale * (1.0 - self.exponent) / self.ref_rate_bps
        ) * (rate_bps / self.ref_rate_bps) ** (self.exponent - 2.0)

    def inverse_slope(self, target_slope: float) -> tuple[float, bool]:
        rate = _inverse_slope_extended_power(self, target_slope)
        return _clamp_min(rate, self.min_rate_bps)

    def inverse_quality(self, target_quality: float) -> float:
        _require_quality_range(target_quality, self.min_quality, self.sup_quality)
        if target_quality >= self.max_quality:
            raise CurveDomainError(
                f"quality {target_quality!r} is at or above the curve supremum {self.max_quality!r}"
            )
        return self.ref_rate_bps * (
            (self.max_quality - target_quality) / self.scale
        ) ** (1.0 / (self.exponent - 1.0))


@dataclass(frozen=True)
class TabulatedCurve:
    """Piecewise-linear curve through sorted (rate_bps, quality) knots.

    Construction rejects anything that is not strictly increasing in both
    coordinates with non-increasing segment slopes.  min_rate_bps defaults to
    the first knot and must lie within the knot range.
    """

    points: tuple[tuple[float, float], ...]
    min_rate_bps: float = -1.0  # sentinel: default to the first knot

    def __post_init__(self):
        pts = tuple((float(r), float(q)) for r, q in self.points)
        if len(pts) < 2:
            raise CurveError("tabulated curve needs at least two knots")
        rates = [p[0] for p in pts]
        quals = [p[1] for p in pts]
        if not all(map(math.isfinite, rates + quals)) or rates[0] <= 0.0:
            raise CurveError("tabulated knots must be finite with positive rates")
        slopes = []
        for i in range(len(pts) - 1):
            dr = rates[i + 1] - rates[i]
            dq = quals[i + 1] - quals[i]
            if dr <= 0.0:
                raise CurveError("tabulated rates must be strictly increasing")
            if dq <= 0.0:
                raise CurveError("tabulated qualities must be strictly increasing")
            slopes.append(dq / dr)
        for a, b in zip(slopes, slopes[1:]):
            if b > a * (1.0 + 1e-12):
                raise CurveError("tabulated curve is not concave (slopes increase)")
        object.__setattr__(self, "points", pts)
        min_rate = rates[0] if self.min_rate_bps < 0.0 else float(self.min_rate_bps)
        if not rates[0] <= min_rate <= rates[-1]:
            raise CurveError(
                f"min_rate_bps {min_rate!r} outside the knot range [{rates[0]!r}, {rates[-1]!r}]"
            )
        object.__setattr__(self, "min_rate_bps", min_rate)
        object.__setattr__(self, "_rates", tuple(rates))
        object.__setattr__(self, "_quals", tuple(quals))
        object.__setattr__(self, "_slopes", tuple(slopes))

    @property
    def max_rate_bps(self) -> float:
        return self._rates[-1]

    @property
    def min_quality(self) -> float:
        return self.quality(self.min_rate_bps)

    @property
    def sup_quality(self) -> float:
        return self._quals[-1]

    def _segment(self, rate_bps: float) -> int:
        """Index of the segment whose half-open span [r_i, r_{i+1}) holds rate."""
        i = bisect_right(self._rates, rate_bps) - 1
        return min(max(i, 0), len(self._slopes) - 1)

    def quality(self, rate_bps: float) -> float:
        _require_at_least_min(rate_bps, self.min_rate_bps)
        top = self._rates[-1]
        if rate_bps > top:
            if rate_bps <= top * (1.0 + _EDGE_RTOL):
                return self._quals[-1]
            raise CurveDomainError(f"rate {rate_bps!r} above the top knot {top!r}")
        i = self._segment(rate_bps)
        return self._quals[i] + self._slopes[i] * (rate_bps - self._rates[i])

    def slope(self, rate_bps: float) -> float:
        _require_at_least_min(rate_bps, self.min_rate_bps)
        top = self._rates[-1]
        if rate_bps > top * (1.0 + _EDGE_RTOL):
            raise CurveDomainError(f"rate {rate_bps!r} above the top knot {top!r}")
        # Right-hand slope at knots; the top knot reports the last segment.
        return self._slopes[self._segment(min(rate_bps, top))]

    def inverse_slope(self, target_slope: float) -> tuple[float, bool]:
        rate = self._inverse_slope_knotted(target_slope)
        return _clamp_min(rate, self.min_rate_bps)

    def _inverse_slope_knotted(self, target_slope: float) -> float:
        if not (math.isfinite(target_slope) and target_slope > 0.0):
            raise CurveDomainError(f"target slope must be finite and > 0, got {target_slope!r}")
        slopes = self._slopes
        if target_slope < slopes[-1] * (1.0 - _EDGE_RTOL):
            raise CurveDomainError(
                f"target slope {target_slope!r} below the final segment slope {slopes[-1]!r}"
            )
        if target_slope >= slopes[0]:
            return self._rates[0]
        # slopes are non-increasing; find the first segment at or below target
        for i, s in enumerate(slopes):
            if s <= target_slope:
                # target in the subgradient gap (slopes[i-1], slopes[i]] at knot i,
                # or exactly this segment's slope: the infimum of the level set
                # is knot i either way.
                return self._rates[i]
        return self._rates[-1]

    def inverse_quality(self, target_quality: float) -> float:
        _require_quality_range(target_quality, self.min_quality, self.sup_quality)
        quals = self._quals
        if target_quality >= quals[-1]:
            if target_quality <= quals[-1] + abs(quals[-1]) * _EDGE_RTOL:
                return self._rates[-1]
            raise CurveDomainError(f"quality {target_quality!r} above the top knot")
        i = min(max(bisect_right(quals, target_quality) - 1, 0), len(self._slopes) - 1)
        return self._rates[i] + (target_quality - quals[i]) / self._slopes[i]


RateQualityCurve = LogCurve | ShiftedPowerCurve | TabulatedCurve


def _require_at_least_min(rate_bps: float, min_rate_bps: float) -> None:
    if not math.isfinite(rate_bps) or rate_bps < min_rate_bps * (1.0 - _EDGE_RTOL):
        raise CurveDomainError(
            f"rate {rate_bps!r} below the minimum representation {min_rate_bps!r}"
        )


def _require_quality_range(q: float, q_min: float, q_sup: float) -> None:
    if q < q_min - abs(q_min) * _EDGE_RTOL - 1e-300:
        raise CurveDomainError(f"quality {q!r} below the minimum representation quality {q_min!r}")
    if q > q_sup:
        raise CurveDomainError(f"quality {q!r} above the curve supremum {q_sup!r}")


def _clamp_min(rate: float, min_rate: float) -> tuple[float, bool]:
    if rate < min_rate:
        return min_rate, True
    return rate, False


def _inverse_slope_extended_log(curve: LogCurve, target_slope: float) -> float:
    if not (math.isfinite(target_slope) and target_slope > 0.0):
        raise CurveDomainError(f"target slope must be finite and > 0, got {target_slope!r}")
    return curve.gain / target_slope


def _inverse_slope_extended_power(curve: ShiftedPowerCurve, target_slope: float) -> float:
    if not (math.isfinite(target_slope) and target_slope > 0.0):
        raise CurveDomainError(f"target slope must be finite and > 0, got {target_slope!r}")
    lead = curve.scale * (1.0 - curve.exponent) / curve.ref_rate_bps
    return curve.ref_rate_bps * (target_slope / lead) ** (1.0 / (curve.exponent - 2.0))


def inverse_slope_extended(curve: RateQualityCurve, target_slope: float) -> float:
    """Slope inversion without the minimum-representation floor.

    Used where an operating point below min_rate must be detected rather
    than clamped (admission at the pure stationarity point).  Tabulated
    curves still floor at their first knot, the true end of their domain.
    """
    if isinstance(curve, LogCurve):
        return _inverse_slope_extended_log(curve, target_slope)
    if isinstance(curve, ShiftedPowerCurve):
        return _inverse_slope_extended_power(curve, target_slope)
    return curve._inverse_slope_knotted(target_slope)


def inverse_quality_extended(curve: RateQualityCurve, target_quality: float) -> float:
    """Quality inversion without the minimum-representation floor."""
    if isinstance(curve, LogCurve):
        return curve.ref_rate_bps * math.exp(target_quality / curve.gain)
    if isinstance(curve, ShiftedPowerCurve):
        if target_quality >= curve.max_quality:
            raise CurveDomainError("quality at or above the curve supremum")
        return curve.ref_rate_bps * (
            (curve.max_quality - target_quality) / curve.scale
        ) ** (1.0 / (curve.exponent - 1.0))
    if target_quality <= curve._quals[0]:
        return curve._rates[0]
    return curve.inverse_quality(min(target_quality, curve.sup_quality))
