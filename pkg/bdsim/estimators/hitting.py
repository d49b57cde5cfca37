"""Hitting-time linearity for the drifted N-BBM and for Brownian bees."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial
from typing import Sequence

from bdsim.core.config import DEFAULTS
from bdsim.core.errors import ConfigurationError, ResourceCapError
from bdsim.core.validation import validation
from bdsim.simulation.kernel import RandomSource
from bdsim.simulation.observers import ThresholdHitDetector
from bdsim.simulation.particles import barrier_hit_time, new_system, simulate_until
from bdsim.simulation.rules import RuleKind, ScoreRule
from bdsim.utils.tables import ResultTable

from .replicates import run_replicates
from .speed import CriticalSpeed, CriticalSpeedCache
from .stats import LinearFit, MomentAccumulator, fit_line

LOGGER = logging.getLogger("bdsim.hitting")
SYSTEM_KINDS = ("nbbm_drift", "bees_drift")


def nbbm_passage_time(n: int, mu: float, level: float, t_max: float, src: RandomSource) -> float:
    """Event-resolved tau_{R,mu} = inf{t: X_1(t) - mu t >= R} from all particles at 0.

    Simulated in the frame moving at speed mu, i.e. with drift -mu.
    """
    state = new_system(n, 1, None, ScoreRule.of(RuleKind.KILL_LEFT), -mu)
    detector = ThresholdHitDetector(level)
    simulate_until(state, t_max, src, [detector])
    if detector.hit_time is None:
        raise ResourceCapError(f"N-BBM did not reach level {level} before t_max={t_max:g}", details={"level": level, "t_max": t_max})
    return detector.hit_time


def bees_return_time(n: int, mu: float, start: float, t_max: float, tol: float, src: RandomSource) -> float:
    """First touch of 0 by bees with drift mu, every particle started at ``start``."""
    state = new_system(n, 1, [start] * n, ScoreRule.of(RuleKind.BEES), mu)
    hit = barrier_hit_time(state, 0.0, t_max, src, tol=tol)
    if hit is None:
        raise ResourceCapError(f"bees started at {start} did not touch 0 before t_max={t_max:g}", details={"start": start, "t_max": t_max})
    return hit


@dataclass(slots=True)
class HittingResult:
    system_kind: str
    n: int
    mu: float
    table: ResultTable
    fit: LinearFit
    critical: CriticalSpeed | None = None


def hitting_time_linearity(
    system_kind: str,
    n: int,
    mu: float,
    r_grid: Sequence[float],
    reps: int,
    src: RandomSource,
    *,
    critical: CriticalSpeedCache | None = None,
    t_max: float = DEFAULTS.hitting_t_max,
    tol: float = DEFAULTS.crossing_tol,
    threads: int = 1,
    progress: bool = False,
) -> HittingResult:
    """Mean hitting time per grid value and its linear fit; columns ``r,mean_tau,stderr``.

    Every grid value gets its own replicate streams (``src.fork("r<index>")``),
    so the rows are independent. The fit reports slope, intercept and R^2;
    no intercept is asserted.
    """
    if system_kind not in SYSTEM_KINDS:
        raise ConfigurationError(f"system_kind must be one of {SYSTEM_KINDS} (got {system_kind!r})")
    grid = validation.validate_grid("r_grid", r_grid, minimum=0.0).data
    if system_kind == "bees_drift" and grid[0] <= 0.0:
        raise ConfigurationError("bees_drift start points must be positive")
    cache = critical or CriticalSpeedCache(src, threads=threads)
    entry = cache.require_subcritical(n, mu)

    table = ResultTable("hitting", ["r", "mean_tau", "stderr"])
    for index, level in enumerate(grid):
        if system_kind == "nbbm_drift":
            task = partial(nbbm_passage_time, n, float(mu), level, t_max)
        else:
            task = partial(bees_return_time, n, float(mu), level, t_max, tol)
        times = run_replicates(task, src.fork(f"r{index}"), reps, threads=threads, progress=progress, desc=f"R={level:g}")
        acc = MomentAccumulator.from_values(times)
        table.append(level, acc.mean, acc.standard_error)
    if len(grid) >= 2:
        fit = fit_line(grid, table.column("mean_tau"))
    else:
        fit = LinearFit(0.0, float(table.rows[0][1]), 1.0, 0.0, 0.0, 1)
    LOGGER.info("%s N=%d mu=%g: slope %.6g, R^2 %.6g", system_kind, n, mu, fit.slope, fit.r_squared)
    return HittingResult(system_kind=system_kind, n=n, mu=float(mu), table=table, fit=fit, critical=entry)


__all__ = ["HittingResult", "SYSTEM_KINDS", "bees_return_time", "hitting_time_linearity", "nbbm_passage_time"]
