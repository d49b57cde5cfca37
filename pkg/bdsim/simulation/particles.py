"""Event-driven Brunet-Derrida particle systems.

Between events every particle follows an independent Brownian motion with the
common drift. Events arrive at rate N (the population size); at each one a
uniformly chosen particle is duplicated onto the victim picked by the score
rule. Positions are only realised at event times; path functionals between
events are recovered by observers from bridge laws.

Each event step draws exactly ``2 + N*d`` uniforms from the motion stream:
the gap, the duplication index, then one Gaussian per coordinate in sorted
rank order. A step clipped at ``t_end`` draws the same block.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Sequence

import numpy as np
from scipy import special
from scipy.spatial.distance import pdist

from bdsim.core.errors import ConfigurationError, ResourceCapError, UnsupportedConfigurationError
from bdsim.core.validation import validation

from .genealogy import NO_LABEL, GenealogyLog
from .kernel import DEFAULT_CROSSING_TOL, RandomSource, open_uniforms
from .rules import DriftSpec, RuleKind, ScoreRule, select_victim, sort_order

LOGGER = logging.getLogger("bdsim.particles")
DEFAULT_POPULATION_CAP = 1_000_000


@dataclass(slots=True)
class ParticleState:
    """Positions (shape (N, d), sorted by the rule's convention) plus run bookkeeping."""

    time: float
    positions: np.ndarray
    labels: np.ndarray
    rule: ScoreRule
    drift: DriftSpec
    next_label: int
    genealogy: GenealogyLog | None = None
    cap: int = DEFAULT_POPULATION_CAP

    @property
    def n(self) -> int:
        return int(self.positions.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.positions.shape[1])

    @property
    def values(self) -> np.ndarray:
        """First coordinate of every particle (the positions themselves in d=1)."""
        return self.positions[:, 0]

    def diameter(self) -> float:
        if self.n < 2:
            return 0.0
        if self.dimension == 1:
            column = self.positions[:, 0]
            return float(column.max() - column.min())
        return float(pdist(self.positions).max())

    def copy(self) -> "ParticleState":
        return ParticleState(
            time=self.time,
            positions=self.positions.copy(),
            labels=self.labels.copy(),
            rule=self.rule,
            drift=self.drift,
            next_label=self.next_label,
            genealogy=None,
            cap=self.cap,
        )


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One clock ring. Indices are 0-based ranks in the sorted order at J-.

    ``victim_index`` is -1 when nothing is removed (L-BBM). ``culled`` counts
    L-BBM removals after the branching.
    """

    event_time: float
    duplicated_index: int
    victim_index: int
    was_noop: bool
    culled: int = 0


@dataclass(slots=True)
class TrajectorySummary:
    """Per-replicate observables collected by `simulate_until`."""

    final_time: float
    positions: np.ndarray
    event_count: int
    noop_count: int
    diameter: float
    sup_radius: float | None = None
    hit_time: float | None = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def leftmost(self) -> float:
        return float(self.positions[:, 0].min())

    @property
    def rightmost(self) -> float:
        return float(self.positions[:, 0].max())


class Observer:
    """Hook interface for path functionals. Subclasses override what they need."""

    halt: bool = False

    def on_start(self, state: ParticleState) -> None:
        pass

    def on_segment(self, t0: float, dt: float, start: np.ndarray, end: np.ndarray) -> None:
        """``start``/``end`` are index-aligned (N, d) arrays bracketing one inter-event interval."""

    def on_event(self, state: ParticleState, record: EventRecord) -> None:
        pass

    def on_finish(self, state: ParticleState) -> None:
        pass

    def contribute(self, summary: TrajectorySummary) -> None:
        pass


def _as_points(init: Sequence[Any], dimension: int) -> np.ndarray:
    points = [point if isinstance(point, (list, tuple, np.ndarray)) else [point] for point in init]
    return np.asarray(points, dtype=float).reshape(len(points), dimension)


def new_system(
    n: int,
    d: int,
    init: Sequence[Any] | None,
    rule: ScoreRule,
    drift: DriftSpec | float | Sequence[float] = 0.0,
    *,
    track_genealogy: bool = False,
    cap: int = DEFAULT_POPULATION_CAP,
) -> ParticleState:
    """Build the time-0 state. ``init=None`` places every particle at the origin.

    Construction consumes no randomness.
    """
    if n < 1:
        raise ConfigurationError(f"population size must be >= 1 (got {n})")
    rule.check_dimension(d)
    if not isinstance(drift, DriftSpec):
        drift = DriftSpec.of(drift, d)
    if drift.dimension != d:
        raise ConfigurationError(f"drift dimension {drift.dimension} does not match d={d}")
    if init is None:
        init = [[0.0] * d for _ in range(n)]
    if len(init) == 0:
        raise ConfigurationError("initial condition is empty")
    validation.validate_points("init", [list(np.atleast_1d(p)) for p in init], count=n, dimension=d)

    positions = _as_points(init, d)
    labels = np.arange(n, dtype=np.int64)
    order = sort_order(positions, rule)
    genealogy = GenealogyLog.start(labels.tolist()) if track_genealogy else None
    return ParticleState(
        time=0.0,
        positions=positions[order],
        labels=labels[order],
        rule=rule,
        drift=drift,
        next_label=n,
        genealogy=genealogy,
        cap=cap,
    )


def _resort(state: ParticleState) -> None:
    order = sort_order(state.positions, state.rule)
    state.positions = state.positions[order]
    state.labels = state.labels[order]


def _cull_lbbm(state: ParticleState) -> int:
    culled = 0
    while state.n > 1:
        victim = select_victim(state.positions, state.rule, state.time)
        if victim is None:
            break
        if state.genealogy is not None:
            state.genealogy.record(state.time, NO_LABEL, NO_LABEL, int(state.labels[victim]))
        state.positions = np.delete(state.positions, victim, axis=0)
        state.labels = np.delete(state.labels, victim)
        culled += 1
    return culled


def advance_to_next_event(
    state: ParticleState,
    src: RandomSource,
    *,
    t_limit: float | None = None,
    observers: Sequence[Observer] = (),
) -> tuple[ParticleState, EventRecord | None]:
    """Move to the next event (or to ``t_limit`` if the clock rings later).

    The state is updated in place and returned. The record is None when the
    step was clipped at ``t_limit``; memorylessness of the clock makes the
    clipped increment exact.
    """
    n, d = state.positions.shape
    u = src.uniforms(2 + n * d)
    gap = -math.log1p(-float(u[0])) / n
    t0 = state.time
    clipped = t_limit is not None and t0 + gap > t_limit
    dt = (t_limit - t0) if clipped else gap

    start = state.positions
    if dt > 0.0:
        end = start + math.sqrt(dt) * special.ndtri(open_uniforms(u[2:])).reshape(n, d)
        if not state.drift.is_zero:
            end = end + state.drift.as_array() * dt
    else:
        end = start.copy()
    for observer in observers:
        observer.on_segment(t0, dt, start, end)

    state.time = t_limit if clipped else t0 + gap
    state.positions = end
    _resort(state)

    if clipped:
        if state.rule.kind is RuleKind.LBBM:
            _cull_lbbm(state)
        return state, None

    k = min(int(float(u[1]) * n), n - 1)
    if state.rule.kind is RuleKind.LBBM:
        child = state.next_label
        state.next_label += 1
        if state.genealogy is not None:
            state.genealogy.record(state.time, int(state.labels[k]), child, NO_LABEL)
        state.positions = np.vstack([state.positions, state.positions[k]])
        state.labels = np.append(state.labels, child)
        _resort(state)
        culled = _cull_lbbm(state)
        if state.n > state.cap:
            raise ResourceCapError(
                f"L-BBM population {state.n} exceeded cap {state.cap} at t={state.time:.6g}",
                details={"population": state.n, "cap": state.cap},
            )
        record = EventRecord(state.time, k, -1, False, culled)
    else:
        victim = select_victim(state.positions, state.rule, state.time)
        noop = victim == k
        if not noop:
            child = state.next_label
            state.next_label += 1
            if state.genealogy is not None:
                state.genealogy.record(state.time, int(state.labels[k]), child, int(state.labels[victim]))
            state.positions[victim] = state.positions[k]
            state.labels[victim] = child
            _resort(state)
        record = EventRecord(state.time, k, int(victim), noop)

    for observer in observers:
        observer.on_event(state, record)
    return state, record


def simulate_until(
    state: ParticleState,
    t_end: float,
    src: RandomSource,
    observers: Iterable[Observer] = (),
) -> TrajectorySummary:
    """Run events until ``t_end`` (or until an observer halts) and summarise."""
    if t_end < state.time:
        raise ConfigurationError(f"t_end={t_end} precedes the current time {state.time}")
    observers = list(observers)
    for observer in observers:
        observer.on_start(state)

    events = 0
    noops = 0
    while state.time < t_end and not any(observer.halt for observer in observers):
        _, record = advance_to_next_event(state, src, t_limit=t_end, observers=observers)
        if record is not None:
            events += 1
            noops += int(record.was_noop)

    for observer in observers:
        observer.on_finish(state)
    summary = TrajectorySummary(
        final_time=state.time,
        positions=state.positions.copy(),
        event_count=events,
        noop_count=noops,
        diameter=state.diameter(),
    )
    for observer in observers:
        observer.contribute(summary)
    LOGGER.debug("simulated to t=%.6g with %d events (%d no-ops)", state.time, events, noops)
    return summary


def barrier_hit_time(
    state: ParticleState,
    barrier: float,
    t_max: float,
    src: RandomSource,
    *,
    tol: float = DEFAULT_CROSSING_TOL,
) -> float | None:
    """First time <= t_max any particle touches ``barrier``; None if it is not hit.

    Crossing coins and bisection draws come from ``src.child("bridge")`` so the
    dynamics consume the same draws as an unobserved run.
    """
    if state.dimension != 1:
        raise UnsupportedConfigurationError(f"barrier hitting requires d=1 (got d={state.dimension})")
    if np.any(state.positions[:, 0] == barrier):
        return state.time
    from .observers import BarrierHitDetector

    detector = BarrierHitDetector(barrier, src.child("bridge"), tol=tol)
    simulate_until(state, t_max, src, [detector])
    return detector.hit_time


__all__ = [
    "DEFAULT_POPULATION_CAP",
    "EventRecord",
    "Observer",
    "ParticleState",
    "TrajectorySummary",
    "advance_to_next_event",
    "barrier_hit_time",
    "new_system",
    "simulate_until",
]
