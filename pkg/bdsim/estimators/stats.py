"""Replicate-level aggregation: moment accumulators, estimate reports, fits, and KS helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from bdsim.core.errors import ConfigurationError

Z95 = 1.96


@dataclass(slots=True)
class MomentAccumulator:
    """Associative (count, sum, sum of squares) triple.

    Replicates are folded in index order; `merge` lets partial accumulators be
    combined without depending on completion order.
    """

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "MomentAccumulator":
        acc = cls()
        for value in values:
            acc.add(value)
        return acc

    def add(self, value: float) -> None:
        value = float(value)
        self.count += 1
        self.total += value
        self.total_sq += value * value

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        return MomentAccumulator(self.count + other.count, self.total + other.total, self.total_sq + other.total_sq)

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ConfigurationError("mean of an empty accumulator")
        return self.total / self.count

    @property
    def variance(self) -> float:
        """Unbiased sample variance; 0 for a single value."""
        if self.count < 2:
            return 0.0
        centered = self.total_sq - self.total * self.total / self.count
        return max(centered, 0.0) / (self.count - 1)

    @property
    def standard_error(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.variance / self.count)


class EstimateReport(BaseModel):
    """Point estimate with its replicate standard error.

    ``ci95`` is always ``point_estimate +/- 1.96 * standard_error``. The error is
    0 only when every replicate returned the same value (e.g. N=1 diameters).
    """

    model_config = ConfigDict(frozen=True)

    point_estimate: float
    standard_error: float = Field(ge=0.0)
    replicate_count: int = Field(ge=1)
    horizon: float
    ci95: Tuple[float, float] = (0.0, 0.0)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _fill_interval(cls, data: Any) -> Any:
        if isinstance(data, dict) and "ci95" not in data:
            point = float(data["point_estimate"])
            half = Z95 * float(data["standard_error"])
            data = {**data, "ci95": (point - half, point + half)}
        return data

    @model_validator(mode="after")
    def _check_interval(self) -> "EstimateReport":
        half = Z95 * self.standard_error
        lo, hi = self.ci95
        scale = max(1.0, abs(self.point_estimate))
        if abs(lo - (self.point_estimate - half)) > 1e-9 * scale or abs(hi - (self.point_estimate + half)) > 1e-9 * scale:
            raise ValueError("ci95 must equal point_estimate +/- 1.96 * standard_error")
        return self

    @classmethod
    def from_accumulator(cls, acc: MomentAccumulator, *, horizon: float, **diagnostics: Any) -> "EstimateReport":
        return cls(
            point_estimate=acc.mean,
            standard_error=acc.standard_error,
            replicate_count=acc.count,
            horizon=float(horizon),
            diagnostics=diagnostics,
        )

    @classmethod
    def from_values(cls, values: Sequence[float], *, horizon: float, **diagnostics: Any) -> "EstimateReport":
        return cls.from_accumulator(MomentAccumulator.from_values(values), horizon=horizon, **diagnostics)

    def within(self, value: float, *, se_multiple: float = 3.0, allowance: float = 0.0) -> bool:
        return abs(self.point_estimate - value) <= se_multiple * self.standard_error + allowance

    def overlaps(self, other: "EstimateReport") -> bool:
        return self.ci95[0] <= other.ci95[1] and other.ci95[0] <= self.ci95[1]


@dataclass(frozen=True, slots=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    intercept_stderr: float
    points: int

    def slope_ci95(self) -> Tuple[float, float]:
        """Student-t interval on the slope; NaN bounds when fewer than three points."""
        if self.points < 3:
            return (math.nan, math.nan)
        half = float(stats.t.ppf(0.975, self.points - 2)) * self.slope_stderr
        return (self.slope - half, self.slope + half)


def fit_line(xs: Sequence[float], ys: Sequence[float]) -> LinearFit:
    """Least-squares line through (xs, ys) via `scipy.stats.linregress`."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise ConfigurationError(f"a linear fit needs at least two paired points (got {x.size} and {y.size})")
    if np.ptp(x) == 0.0:
        raise ConfigurationError("a linear fit needs at least two distinct x values")
    if np.ptp(y) == 0.0:
        return LinearFit(0.0, float(y[0]), 1.0, 0.0, 0.0, int(x.size))
    result = stats.linregress(x, y)
    return LinearFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue) ** 2,
        slope_stderr=float(result.stderr),
        intercept_stderr=float(result.intercept_stderr),
        points=int(x.size),
    )


@dataclass(frozen=True, slots=True)
class KsResult:
    statistic: float
    pvalue: float


def two_sample_ks(a: Sequence[float], b: Sequence[float]) -> KsResult:
    result = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return KsResult(float(result.statistic), float(result.pvalue))


def z_score(lhs: float, lhs_se: float, rhs: float, rhs_se: float) -> float:
    """Standardised difference; 0 when both sides are exact and equal, inf when exact and different."""
    spread = math.hypot(lhs_se, rhs_se)
    if spread == 0.0:
        return 0.0 if lhs == rhs else math.copysign(math.inf, lhs - rhs)
    return (lhs - rhs) / spread


__all__ = [
    "EstimateReport",
    "KsResult",
    "LinearFit",
    "MomentAccumulator",
    "fit_line",
    "two_sample_ks",
    "z_score",
]
