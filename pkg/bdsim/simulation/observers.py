"""Observers that recover path functionals between event times."""

from __future__ import annotations

import math
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .kernel import (
    DEFAULT_CROSSING_TOL,
    BridgeQuery,
    RandomSource,
    abs_sup_survival,
    bridge_abs_sup_sample,
    bridge_first_crossing_time,
)
from .particles import EventRecord, Observer, ParticleState, TrajectorySummary


def _crossing_mask(start: np.ndarray, end: np.ndarray, dt: float, barrier: float, src: RandomSource) -> np.ndarray:
    """One crossing coin per particle (d=1 columns); always consumes len(start) uniforms."""
    da = start - barrier
    db = end - barrier
    product = da * db
    probability = np.where(product <= 0.0, 1.0, np.exp(-2.0 * np.maximum(product, 0.0) / dt))
    return src.uniforms(start.shape[0]) < probability


class DiameterTracker(Observer):
    """Diameter at time 0, after every event, and at the end."""

    def __init__(self) -> None:
        self.history: List[Tuple[float, float]] = []

    def on_start(self, state: ParticleState) -> None:
        self.history.append((state.time, state.diameter()))

    def on_event(self, state: ParticleState, record: EventRecord) -> None:
        self.history.append((state.time, state.diameter()))

    def on_finish(self, state: ParticleState) -> None:
        if not self.history or self.history[-1][0] != state.time:
            self.history.append((state.time, state.diameter()))

    @property
    def max_diameter(self) -> float:
        return max((value for _, value in self.history), default=0.0)

    def contribute(self, summary: TrajectorySummary) -> None:
        summary.diagnostics["max_diameter"] = self.max_diameter


class SupRadiusTracker(Observer):
    """Running sup over continuous time of |x| (d=1, exact) or an upper bound on ||x|| (d>1).

    In d=1 one uniform per particle and segment is compared with the segment's
    sup-CDF at the current record; only segments that beat the record are
    inverted exactly. In d>1 each coordinate's sup |x_j| is sampled exactly
    and the bound sqrt(sum_j sup|x_j|^2) is used.
    """

    def __init__(self, src: RandomSource) -> None:
        self.src = src
        self.sup_radius = 0.0

    def on_start(self, state: ParticleState) -> None:
        self.sup_radius = float(np.linalg.norm(state.positions, axis=1).max())

    def on_segment(self, t0: float, dt: float, start: np.ndarray, end: np.ndarray) -> None:
        if dt <= 0.0:
            return
        n, d = start.shape
        if d == 1:
            a = start[:, 0]
            b = end[:, 0]
            u = self.src.uniforms(n)
            below = abs_sup_survival(a, b, dt, np.full(n, self.sup_radius))
            for index in np.flatnonzero(u >= below):
                sample = bridge_abs_sup_sample(float(a[index]), float(b[index]), dt, float(u[index]))
                self.sup_radius = max(self.sup_radius, sample)
            return
        u = self.src.uniforms(n * d).reshape(n, d)
        for index in range(n):
            coords = [bridge_abs_sup_sample(float(start[index, j]), float(end[index, j]), dt, float(u[index, j])) for j in range(d)]
            self.sup_radius = max(self.sup_radius, math.sqrt(sum(value * value for value in coords)))

    def contribute(self, summary: TrajectorySummary) -> None:
        summary.sup_radius = self.sup_radius


class BarrierHitDetector(Observer):
    """Exact first touch of a barrier by any particle (d=1)."""

    def __init__(self, barrier: float, src: RandomSource, *, tol: float = DEFAULT_CROSSING_TOL) -> None:
        self.barrier = float(barrier)
        self.src = src
        self.tol = tol
        self.hit_time: float | None = None

    def on_start(self, state: ParticleState) -> None:
        if np.any(state.positions[:, 0] == self.barrier):
            self.hit_time = state.time
            self.halt = True

    def on_segment(self, t0: float, dt: float, start: np.ndarray, end: np.ndarray) -> None:
        if self.halt or dt <= 0.0:
            return
        crossed = _crossing_mask(start[:, 0], end[:, 0], dt, self.barrier, self.src)
        if not crossed.any():
            return
        first = min(
            bridge_first_crossing_time(BridgeQuery(float(start[i, 0]), float(end[i, 0]), dt, self.barrier), self.src, self.tol)
            for i in np.flatnonzero(crossed)
        )
        self.hit_time = t0 + first
        self.halt = True

    def contribute(self, summary: TrajectorySummary) -> None:
        summary.hit_time = self.hit_time


class ThresholdHitDetector(Observer):
    """First event-resolved time at which every particle sits at or above ``level``.

    Checked at time 0, at the end of each segment (pre-event) and after each
    event, so the reported time can overshoot the continuous-time first
    passage by at most one inter-event gap.
    """

    def __init__(self, level: float) -> None:
        self.level = float(level)
        self.hit_time: float | None = None

    def _check(self, time: float, positions: np.ndarray) -> None:
        if self.hit_time is None and float(positions[:, 0].min()) >= self.level:
            self.hit_time = time
            self.halt = True

    def on_start(self, state: ParticleState) -> None:
        self._check(state.time, state.positions)

    def on_segment(self, t0: float, dt: float, start: np.ndarray, end: np.ndarray) -> None:
        self._check(t0 + dt, end)

    def on_event(self, state: ParticleState, record: EventRecord) -> None:
        self._check(state.time, state.positions)

    def contribute(self, summary: TrajectorySummary) -> None:
        summary.hit_time = self.hit_time


class ReturnCounter(Observer):
    """Counts disjoint returns of the system to a barrier (d=1).

    The counter is armed while every particle is strictly on one side of the
    barrier; a crossing by any particle during an armed segment counts one
    return and disarms it. Re-arming is checked at event times, so several
    touches inside one inter-event interval count once.
    """

    def __init__(self, src: RandomSource, barrier: float = 0.0, *, tol: float = DEFAULT_CROSSING_TOL) -> None:
        self.src = src
        self.barrier = float(barrier)
        self.tol = tol
        self.count = 0
        self.last_return: float | None = None
        self.armed = False

    def _one_sided(self, positions: np.ndarray) -> bool:
        offsets = positions[:, 0] - self.barrier
        return bool(np.all(offsets > 0.0) or np.all(offsets < 0.0))

    def on_start(self, state: ParticleState) -> None:
        self.armed = self._one_sided(state.positions)

    def on_segment(self, t0: float, dt: float, start: np.ndarray, end: np.ndarray) -> None:
        if dt <= 0.0:
            return
        crossed = _crossing_mask(start[:, 0], end[:, 0], dt, self.barrier, self.src)
        if self.armed and crossed.any():
            first = min(
                bridge_first_crossing_time(BridgeQuery(float(start[i, 0]), float(end[i, 0]), dt, self.barrier), self.src, self.tol)
                for i in np.flatnonzero(crossed)
            )
            self.count += 1
            self.last_return = t0 + first
            self.armed = False
        if not self.armed and self._one_sided(end):
            self.armed = True

    def on_event(self, state: ParticleState, record: EventRecord) -> None:
        if not self.armed and self._one_sided(state.positions):
            self.armed = True

    def contribute(self, summary: TrajectorySummary) -> None:
        summary.diagnostics["return_count"] = self.count
        summary.diagnostics["last_return"] = self.last_return


class RenewalExtractor(Observer):
    """Branch-time increments of the N=2 kill-left chain.

    At every effective event both particles sit at one point; the increments
    of that point and of the event times form the renewal sample.
    """

    def __init__(self) -> None:
        self.times: List[float] = []
        self.points: List[float] = []

    def on_start(self, state: ParticleState) -> None:
        self.times = [state.time]
        self.points = [float(state.positions[0, 0])]

    def on_event(self, state: ParticleState, record: EventRecord) -> None:
        if not record.was_noop:
            self.times.append(state.time)
            self.points.append(float(state.positions[0, 0]))

    @property
    def increments(self) -> np.ndarray:
        return np.diff(np.asarray(self.points, dtype=float))

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(np.asarray(self.times, dtype=float))


class TrajectoryRecorder(Observer):
    """Rows ``time,event_index,particle_index,position[,position_dim2...]`` at every event time."""

    def __init__(self) -> None:
        self.rows: List[list] = []
        self._events = 0
        self._dimension = 1

    def _snapshot(self, state: ParticleState) -> None:
        for index, point in enumerate(state.positions):
            self.rows.append([state.time, self._events, index, *[float(value) for value in point]])

    def on_start(self, state: ParticleState) -> None:
        self._dimension = state.dimension
        self._snapshot(state)

    def on_event(self, state: ParticleState, record: EventRecord) -> None:
        self._events += 1
        self._snapshot(state)

    def on_finish(self, state: ParticleState) -> None:
        if not self.rows or self.rows[-1][0] != state.time:
            self._snapshot(state)

    @property
    def columns(self) -> List[str]:
        extra = [f"position_dim{j}" for j in range(2, self._dimension + 1)]
        return ["time", "event_index", "particle_index", "position", *extra]

    def write_csv(self, path: Path) -> Path:
        from bdsim.utils.tables import ResultTable

        return ResultTable("trajectory", self.columns, self.rows).write_csv(path)


__all__ = [
    "BarrierHitDetector",
    "DiameterTracker",
    "RenewalExtractor",
    "ReturnCounter",
    "SupRadiusTracker",
    "ThresholdHitDetector",
    "TrajectoryRecorder",
]
