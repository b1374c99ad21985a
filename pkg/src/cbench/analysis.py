"""Performance-model computations: roofline bounds, MLUPS ceilings,
relative performance, time-share breakdowns, regression detection and
numerical verification."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .model import HostProfile

TIME_SHARE_CATEGORIES = ("computation", "synchronization", "communication")

REGRESSION_DIRECTIONS = ("higher-is-better", "lower-is-better")


class UnknownBandwidthKind(KeyError):
    pass


class ZeroBound(ValueError):
    pass


class ZeroTotal(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RooflinePoint:
    label: str
    operational_intensity: float
    achieved_gflops: float

    def __post_init__(self) -> None:
        for name, value in (
            ("operational_intensity", self.operational_intensity),
            ("achieved_gflops", self.achieved_gflops),
        ):
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class TimeShare:
    category: str
    fraction: float
    substeps: Optional[Mapping[str, float]] = None

    def __post_init__(self) -> None:
        if self.category not in TIME_SHARE_CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not 0.0 <= self.fraction <= 1.0 + 1e-12:
            raise ValueError(f"fraction out of range: {self.fraction}")
        if self.substeps is not None:
            object.__setattr__(self, "substeps", dict(sorted(self.substeps.items())))
            total = sum(self.substeps.values())
            if abs(total - self.fraction) > 1e-9:
                raise ValueError(
                    f"sub-step fractions sum to {total}, expected {self.fraction}"
                )


@dataclass(frozen=True)
class RegressionConfig:
    window: int = 3
    threshold_fraction: float = 0.10
    direction: str = "higher-is-better"

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if not self.threshold_fraction > 0:
            raise ValueError("threshold_fraction must be > 0")
        if self.direction not in REGRESSION_DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class RegressionVerdict:
    regression: bool
    magnitude: float  # relative deviation in the "worse" direction
    baseline: float  # median of the comparison window
    latest: float


@dataclass(frozen=True)
class NumericsCheck:
    passed: bool
    max_abs_diff: float


def _bandwidth(host: HostProfile, bandwidth_kind: str) -> float:
    try:
        return float(host.bandwidths_gbps[bandwidth_kind])
    except KeyError:
        raise UnknownBandwidthKind(
            f"{host.hostname!r} has no {bandwidth_kind!r} bandwidth"
        ) from None


def roofline_bound(
    intensity: float, host: HostProfile, bandwidth_kind: str
) -> float:
    """Attainable GFLOP/s at the given operational intensity (FLOP/byte).

    Classic two-ceiling model: min(peak, intensity * bandwidth).
    """
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    bw = _bandwidth(host, bandwidth_kind)
    return min(host.peak_flops_gflops, intensity * bw)


def roofline_knee(host: HostProfile, bandwidth_kind: str) -> float:
    """Intensity where the memory and compute ceilings meet."""
    return host.peak_flops_gflops / _bandwidth(host, bandwidth_kind)


def mlups_bound(
    host: HostProfile, bandwidth_kind: str, bytes_per_update: float
) -> float:
    """Memory-bound ceiling in million lattice updates per second.

    Assumes the kernel is bandwidth limited: ceiling = bandwidth divided
    by the bytes read plus written per lattice-cell update.
    """
    if not bytes_per_update > 0:
        raise ValueError("bytes_per_update must be > 0")
    bw_bytes = _bandwidth(host, bandwidth_kind) * 1e9
    return bw_bytes / bytes_per_update / 1e6


def relative_performance(measured: float, bound: float) -> float:
    """Fraction of a theoretical bound actually achieved.

    May exceed 1.0 when the bound was pessimistic; callers should flag
    such values rather than clip them.
    """
    if not bound > 0:
        raise ZeroBound(f"bound must be > 0, got {bound}")
    if measured < 0:
        raise ValueError("measured must be >= 0")
    return measured / bound


def time_share(
    durations: Mapping[str, float],
    substeps: Optional[Mapping[str, Mapping[str, float]]] = None,
) -> list[TimeShare]:
    """Normalize per-category durations (seconds) into fractions of total.

    Sub-step durations, when given, are normalized against the same total
    so they sum to their category's fraction.
    """
    unknown = set(durations) - set(TIME_SHARE_CATEGORIES)
    if unknown:
        raise ValueError(f"unknown categories: {sorted(unknown)}")
    for category, value in durations.items():
        if value < 0:
            raise ValueError(f"negative duration for {category!r}")
    total = sum(durations.get(c, 0.0) for c in TIME_SHARE_CATEGORIES)
    if not total > 0:
        raise ZeroTotal("total duration must be > 0")
    shares = []
    for category in TIME_SHARE_CATEGORIES:
        sub = None
        if substeps and category in substeps:
            sub = {name: d / total for name, d in substeps[category].items()}
        shares.append(
            TimeShare(
                category=category,
                fraction=durations.get(category, 0.0) / total,
                substeps=sub,
            )
        )
    return shares


def detect_regression(
    series: Sequence[float], cfg: RegressionConfig
) -> RegressionVerdict:
    """Compare the latest value against the median of the preceding window."""
    if len(series) < cfg.window + 1:
        raise InsufficientData(
            f"need at least {cfg.window + 1} values, got {len(series)}"
        )
    window = list(series[-(cfg.window + 1) : -1])
    latest = float(series[-1])
    baseline = float(statistics.median(window))
    if baseline == 0:
        raise ZeroBound("baseline median is zero")
    if cfg.direction == "higher-is-better":
        deviation = (baseline - latest) / baseline
    else:
        deviation = (latest - baseline) / baseline
    return RegressionVerdict(
        regression=deviation > cfg.threshold_fraction,
        magnitude=deviation,
        baseline=baseline,
        latest=latest,
    )


def verify_numerics(
    result_values: Sequence[float],
    reference_values: Sequence[float],
    tolerance: float,
) -> NumericsCheck:
    """Max-norm comparison against a reference solution."""
    if len(result_values) != len(reference_values):
        raise LengthMismatch(
            f"{len(result_values)} result values vs {len(reference_values)} reference"
        )
    max_abs_diff = 0.0
    for a, b in zip(result_values, reference_values):
        max_abs_diff = max(max_abs_diff, abs(float(a) - float(b)))
    return NumericsCheck(passed=max_abs_diff <= tolerance, max_abs_diff=max_abs_diff)
