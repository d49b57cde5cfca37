"""Brownian bees with drift: escape velocity, stationarity proxy, and returns to the origin."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from bdsim.core.config import DEFAULTS
from bdsim.core.errors import ConfigurationError, UnsupportedConfigurationError
from bdsim.simulation.kernel import RandomSource
from bdsim.simulation.observers import ReturnCounter
from bdsim.simulation.particles import ParticleState, new_system, simulate_until
from bdsim.simulation.rules import RuleKind, ScoreRule
from bdsim.utils.tables import ResultTable

from .replicates import run_replicates
from .speed import CriticalSpeedCache
from .stats import EstimateReport, MomentAccumulator, two_sample_ks

LOGGER = logging.getLogger("bdsim.bees")
BEES = ScoreRule.of(RuleKind.BEES)


def _bees(n: int, mu: float, init: Sequence[float] | None) -> ParticleState:
    return new_system(n, 1, list(init) if init is not None else None, BEES, mu)


# ============== Escape velocity ==============


def _escape_sample(n: int, mu: float, horizon: float, src: RandomSource) -> float:
    summary = simulate_until(_bees(n, mu, None), horizon, src)
    return summary.leftmost / horizon


def escape_velocity(
    n: int,
    mu: float,
    horizon: float,
    reps: int,
    src: RandomSource,
    *,
    critical: CriticalSpeedCache | None = None,
    threads: int = 1,
    progress: bool = False,
) -> EstimateReport:
    """Mean of Y_1(horizon)/horizon for bees with drift mu (requires |mu| > v_N).

    ``diagnostics["predicted"]`` is (1 - v/|mu|) mu evaluated at the pilot v.
    """
    cache = critical or CriticalSpeedCache(src, threads=threads)
    entry = cache.require_supercritical(n, mu)
    values = run_replicates(partial(_escape_sample, n, float(mu), float(horizon)), src, reps, threads=threads, progress=progress, desc="escape")
    predicted = (1.0 - entry.speed / abs(mu)) * mu
    return EstimateReport.from_values(values, horizon=horizon, n=n, mu=float(mu), critical_speed=entry.speed, predicted=predicted)


# ============== Stationarity ==============


def _center_of_mass(positions: np.ndarray) -> float:
    return float(positions.mean())


def _diameter(positions: np.ndarray) -> float:
    return float(positions.max() - positions.min())


def _min_abs(positions: np.ndarray) -> float:
    return float(np.abs(positions).min())


def _min_position(positions: np.ndarray) -> float:
    return float(positions.min())


STATISTICS: Dict[str, Callable[[np.ndarray], float]] = {
    "center_of_mass": _center_of_mass,
    "diameter": _diameter,
    "min_abs": _min_abs,
    "min_position": _min_position,
}


def _snapshots(
    n: int, mu: float, init: Tuple[float, ...], burn_in: float, gap: float, count: int, src: RandomSource
) -> List[List[float]]:
    state = _bees(n, mu, init)
    rows = []
    for index in range(count):
        simulate_until(state, burn_in + index * gap, src)
        points = state.positions[:, 0]
        rows.append([func(points) for func in STATISTICS.values()])
    return rows


def stationarity_diagnostic(
    n: int,
    mu: float,
    burn_in: float,
    sample_gap: float,
    samples: int,
    init_a: Sequence[float],
    init_b: Sequence[float],
    src: RandomSource,
    *,
    chains: int = 50,
    shared_randomness: bool = False,
    threads: int = 1,
    progress: bool = False,
) -> ResultTable:
    """Two-sample KS distances between summary statistics started from two initial conditions.

    Each side runs ``chains`` independent chains and takes ``samples // chains``
    snapshots per chain, spaced by ``sample_gap`` after ``burn_in``. This is a
    proxy for total-variation convergence on low-dimensional summaries only.
    Columns ``statistic,ks_distance,pvalue,samples_a,samples_b``.
    """
    if len(init_a) != n or len(init_b) != n:
        raise ConfigurationError(f"init_a and init_b must each have {n} points")
    if samples < chains:
        raise ConfigurationError(f"samples ({samples}) must be >= chains ({chains})")
    per_chain = samples // chains
    side_a = src.fork("side_a")
    side_b = side_a if shared_randomness else src.fork("side_b")
    collected = []
    for init, stream in ((init_a, side_a), (init_b, side_b)):
        task = partial(_snapshots, n, float(mu), tuple(float(x) for x in init), float(burn_in), float(sample_gap), per_chain)
        chains_rows = run_replicates(task, stream, chains, threads=threads, progress=progress, desc="chains")
        collected.append(np.asarray([row for rows in chains_rows for row in rows], dtype=float))
    table = ResultTable("stationarity", ["statistic", "ks_distance", "pvalue", "samples_a", "samples_b"])
    for column, name in enumerate(STATISTICS):
        ks = two_sample_ks(collected[0][:, column], collected[1][:, column])
        table.append(name, ks.statistic, ks.pvalue, int(collected[0].shape[0]), int(collected[1].shape[0]))
    return table


# ============== Recurrence ==============


@dataclass(frozen=True, slots=True)
class ReturnSummary:
    count: int
    last_return: float | None
    horizon: float


def recurrence_return_counter(
    n: int,
    mu: float,
    horizon: float,
    src: RandomSource,
    *,
    init: Sequence[float] | None = None,
    dimension: int = 1,
    rule: RuleKind | str = RuleKind.BEES,
    tol: float = DEFAULTS.crossing_tol,
) -> ReturnSummary:
    """Disjoint returns of the bees system to 0 up to ``horizon``.

    A return completes once the whole system is on one side of 0 again.
    Crossing coins come from ``src.child("bridge")``.
    """
    if dimension != 1:
        raise UnsupportedConfigurationError(f"return counting requires d=1 (got d={dimension})")
    if RuleKind.parse(rule) is not RuleKind.BEES:
        raise UnsupportedConfigurationError(f"return counting is defined for the bees rule (got {rule})")
    state = _bees(n, mu, init)
    counter = ReturnCounter(src.child("bridge"), tol=tol)
    if horizon > 0.0:
        simulate_until(state, horizon, src, [counter])
    return ReturnSummary(count=counter.count, last_return=counter.last_return, horizon=float(horizon))


def _return_sample(n: int, mu: float, horizon: float, tol: float, src: RandomSource) -> ReturnSummary:
    return recurrence_return_counter(n, mu, horizon, src, tol=tol)


def recurrence_profile(
    n: int,
    mu: float,
    horizon: float,
    reps: int,
    src: RandomSource,
    *,
    tol: float = DEFAULTS.crossing_tol,
    threads: int = 1,
    progress: bool = False,
) -> ResultTable:
    """Per-replicate return counts; columns ``replicate,count,last_return,terminated``.

    ``terminated`` marks replicates whose last return (if any) precedes horizon/2.
    """
    results = run_replicates(partial(_return_sample, n, float(mu), float(horizon), tol), src, reps, threads=threads, progress=progress, desc="returns")
    table = ResultTable("recurrence", ["replicate", "count", "last_return", "terminated"])
    for index, result in enumerate(results):
        terminated = result.last_return is None or result.last_return < horizon / 2.0
        table.append(index, result.count, result.last_return, terminated)
    return table


def summarise_returns(table: ResultTable) -> Dict[str, float]:
    counts = MomentAccumulator.from_values(float(value) for value in table.column("count"))
    terminated = [bool(value) for value in table.column("terminated")]
    return {
        "mean_count": counts.mean,
        "count_stderr": counts.standard_error,
        "terminated_fraction": sum(terminated) / len(terminated),
    }


__all__ = [
    "ReturnSummary",
    "STATISTICS",
    "escape_velocity",
    "recurrence_profile",
    "recurrence_return_counter",
    "stationarity_diagnostic",
    "summarise_returns",
]
