"""Speed and diameter estimators, plus the cached critical speed used by regime checks."""

from __future__ import annotations

import logging
from contextlib import nullcontext
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Sequence, Tuple

import numpy as np

from bdsim.core.config import DEFAULTS
from bdsim.core.errors import ConfigurationError, CriticalityError
from bdsim.core.manifest import CriticalSpeedRecord
from bdsim.core.provenance import ProvenanceLogger
from bdsim.core.validation import validation
from bdsim.simulation.kernel import RandomSource
from bdsim.simulation.particles import DEFAULT_POPULATION_CAP, new_system, simulate_until
from bdsim.simulation.rules import RuleKind, ScoreRule
from bdsim.utils.tables import ResultTable

from .replicates import run_replicates
from .stats import EstimateReport, MomentAccumulator

LOGGER = logging.getLogger("bdsim.speed")


def _as_rule(rule: ScoreRule | RuleKind | str) -> ScoreRule:
    return rule if isinstance(rule, ScoreRule) else ScoreRule.of(rule)


def _speed_sample(
    n: int, rule: ScoreRule, mu: float, horizon: float, init: Tuple[float, ...] | None, cap: int, src: RandomSource
) -> Tuple[float, float]:
    state = new_system(n, 1, list(init) if init is not None else None, rule, mu, cap=cap)
    summary = simulate_until(state, horizon, src)
    return summary.leftmost / horizon, summary.rightmost / horizon


def estimate_speed(
    n: int,
    rule: ScoreRule | RuleKind | str,
    mu: float,
    horizon: float,
    reps: int,
    src: RandomSource,
    *,
    init: Sequence[float] | None = None,
    cap: int = DEFAULT_POPULATION_CAP,
    threads: int = 1,
    progress: bool = False,
) -> EstimateReport:
    """Mean of X_1(horizon)/horizon over replicates.

    Diagnostics carry the rightmost particle's speed and the diameter over
    time, the finite-horizon view of the diameter vanishing relative to t.
    """
    if horizon < DEFAULTS.min_speed_horizon:
        raise ConfigurationError(f"speed horizon must be >= {DEFAULTS.min_speed_horizon:g} (got {horizon})")
    if reps < DEFAULTS.min_speed_reps:
        raise ConfigurationError(f"speed needs reps >= {DEFAULTS.min_speed_reps} (got {reps})")
    score_rule = _as_rule(rule)
    task = partial(_speed_sample, n, score_rule, float(mu), float(horizon), tuple(init) if init is not None else None, cap)
    samples = run_replicates(task, src, reps, threads=threads, progress=progress, desc=f"speed N={n}")
    left = MomentAccumulator.from_values(sample[0] for sample in samples)
    right = MomentAccumulator.from_values(sample[1] for sample in samples)
    spread = MomentAccumulator.from_values(sample[1] - sample[0] for sample in samples)
    return EstimateReport.from_accumulator(
        left,
        horizon=horizon,
        n=n,
        rule=score_rule.kind.value,
        mu=float(mu),
        rightmost_speed=right.mean,
        rightmost_speed_se=right.standard_error,
        diameter_over_t=spread.mean,
    )


def _diameter_path(n: int, rule: ScoreRule, grid: Tuple[float, ...], src: RandomSource) -> List[float]:
    state = new_system(n, 1, None, rule)
    values = []
    for horizon in grid:
        summary = simulate_until(state, horizon, src)
        values.append(summary.diameter / horizon)
    return values


def diameter_decay(
    n: int,
    horizon_grid: Sequence[float],
    reps: int,
    src: RandomSource,
    *,
    rule: ScoreRule | RuleKind | str = RuleKind.KILL_LEFT,
    threads: int = 1,
    progress: bool = False,
) -> ResultTable:
    """E[diam_t]/t on an increasing horizon grid, one path per replicate observed at every horizon.

    Columns ``horizon,mean_diameter_over_t,stderr``.
    """
    grid = validation.validate_grid("horizon_grid", horizon_grid, minimum=0.0, strict_minimum=True).data
    task = partial(_diameter_path, n, _as_rule(rule), tuple(grid))
    paths = np.asarray(run_replicates(task, src, reps, threads=threads, progress=progress, desc="diameter"), dtype=float)
    table = ResultTable("diameter", ["horizon", "mean_diameter_over_t", "stderr"])
    for column, horizon in enumerate(grid):
        acc = MomentAccumulator.from_values(paths[:, column])
        table.append(horizon, acc.mean, acc.standard_error)
    return table


# ============== Critical speed ==============


@dataclass(frozen=True, slots=True)
class CriticalSpeed:
    n: int
    rule: str
    speed: float
    stderr: float
    horizon: float
    reps: int
    source: str = "pilot"

    def record(self) -> CriticalSpeedRecord:
        return CriticalSpeedRecord(
            n=self.n, rule=self.rule, speed=self.speed, stderr=self.stderr, horizon=self.horizon, reps=self.reps, source=self.source
        )


class CriticalSpeedCache:
    """Pilot estimates of v_N keyed by (N, rule).

    A pilot runs `estimate_speed` with zero drift on ``src.fork("pilot")``, so
    it never shares streams with the experiment it guards.
    """

    def __init__(
        self,
        src: RandomSource,
        *,
        horizon: float = DEFAULTS.pilot_horizon,
        reps: int = DEFAULTS.pilot_reps,
        margin: float = DEFAULTS.criticality_margin,
        threads: int = 1,
        provenance: ProvenanceLogger | None = None,
    ):
        self.src = src.fork("pilot")
        self.horizon = float(horizon)
        self.reps = int(reps)
        self.margin = float(margin)
        self.threads = threads
        self.provenance = provenance
        self._entries: Dict[Tuple[int, str], CriticalSpeed] = {}

    def put(self, n: int, speed: float, stderr: float, rule: str = RuleKind.KILL_LEFT.value) -> CriticalSpeed:
        entry = CriticalSpeed(n, rule, float(speed), float(stderr), 0.0, 0, source="user")
        self._entries[(n, rule)] = entry
        return entry

    def get(self, n: int, rule: str = RuleKind.KILL_LEFT.value) -> CriticalSpeed:
        key = (n, rule)
        if key not in self._entries:
            pilot = self.src.child(f"{rule}:{n}").fork("replicates")
            stage = self.provenance.stage("pilot", f"pilot v_{n} ({rule})", n=n, rule=rule) if self.provenance is not None else nullcontext({})
            with stage as extra:
                report = estimate_speed(n, rule, 0.0, self.horizon, self.reps, pilot, threads=self.threads)
                extra.update(speed=report.point_estimate, stderr=report.standard_error)
            self._entries[key] = CriticalSpeed(n, rule, report.point_estimate, report.standard_error, self.horizon, self.reps)
            LOGGER.info("pilot v_%d (%s) = %.6g +/- %.2g", n, rule, report.point_estimate, report.standard_error)
        return self._entries[key]

    def records(self) -> List[CriticalSpeedRecord]:
        return [entry.record() for _, entry in sorted(self._entries.items())]

    def _classify(self, n: int, mu: float) -> Tuple[CriticalSpeed, float]:
        entry = self.get(n)
        distance = abs(mu) - entry.speed
        if abs(distance) <= self.margin * entry.stderr:
            raise CriticalityError(
                f"|mu|={abs(mu):.6g} is within {self.margin:g} SE of the critical speed v_{n}={entry.speed:.6g} (SE {entry.stderr:.2g})",
                details={"mu": mu, "critical_speed": entry.speed, "stderr": entry.stderr},
            )
        return entry, distance

    def require_subcritical(self, n: int, mu: float) -> CriticalSpeed:
        entry, distance = self._classify(n, mu)
        if distance > 0.0:
            raise ConfigurationError(
                f"|mu|={abs(mu):.6g} exceeds the critical speed v_{n}={entry.speed:.6g}; this experiment needs |mu| < v_N",
                details={"mu": mu, "critical_speed": entry.speed, "stderr": entry.stderr},
            )
        return entry

    def require_supercritical(self, n: int, mu: float) -> CriticalSpeed:
        entry, distance = self._classify(n, mu)
        if distance < 0.0:
            raise ConfigurationError(
                f"|mu|={abs(mu):.6g} is below the critical speed v_{n}={entry.speed:.6g}; this experiment needs |mu| > v_N",
                details={"mu": mu, "critical_speed": entry.speed, "stderr": entry.stderr},
            )
        return entry


__all__ = [
    "CriticalSpeed",
    "CriticalSpeedCache",
    "diameter_decay",
    "estimate_speed",
]
