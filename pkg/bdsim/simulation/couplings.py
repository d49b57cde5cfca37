"""Shared-randomness couplings with per-event invariant checks.

Both sides of a pair consume one clock, one duplication index and one
Gaussian per rank of the larger system. Increments are paired by sorted rank,
so particles in the same relative position share a Brownian motion and the
declared inequality is a deterministic invariant of the construction.

* monotone: kill-left systems of sizes n <= n'. The n' clock drives both; the
  index K' counts ranks of the larger system. The smaller system is aligned at
  the top of the larger one. Its rank i takes the increment of rank
  i + (n' - n) and it duplicates its rank K' - (n' - n) whenever that is a
  valid rank. The i-th largest of X never exceeds the i-th largest of Y; the
  n' - n lowest ranks of Y have no partner.
* kill-right vs bees: a driftless kill-right N-BBM X against Brownian bees
  with drift mu, simulated in the moving frame Y - mu t. Identical
  floating-point operations on both sides make X <= Y - mu t exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence

import numpy as np
from scipy import special

from bdsim.core.errors import ConfigurationError, PreconditionError
from bdsim.utils.tables import ResultTable

from .kernel import RandomSource, open_uniforms
from .particles import ParticleState, new_system
from .rules import RuleKind, ScoreRule, select_victim

LOGGER = logging.getLogger("bdsim.couplings")
NUMERICAL_ALARM = 1e-12
PAIRINGS = ("rank", "reversed")


class Comparison(str, Enum):
    COMPONENTWISE_LEQ = "componentwise_leq"
    SHIFTED_LEQ = "shifted_leq"


@dataclass(slots=True)
class CouplingCheck:
    """Outcome of one invariant check; rank/value fields describe the first violation."""

    ok: bool
    event_index: int
    event_time: float = 0.0
    rank: int | None = None
    value_a: float | None = None
    value_b: float | None = None
    numerical_alarm: bool = False

    def describe(self) -> str:
        if self.ok:
            return f"coupling invariant holds at event {self.event_index}"
        label = "numerical alarm" if self.numerical_alarm else "violation"
        return f"{label} at event {self.event_index} (t={self.event_time:.6g}), rank {self.rank}: a={self.value_a!r} > b={self.value_b!r}"


@dataclass(slots=True)
class CouplingReport:
    events: int
    violations: int
    alarms: int
    first_violation: CouplingCheck | None = None

    @property
    def ok(self) -> bool:
        return self.violations == 0


@dataclass(slots=True)
class CoupledPair:
    """Two systems advanced on one stream.

    ``frame_b`` holds the coordinates of side b that enter the comparison:
    Y itself for the monotone coupling, Y - mu t for kill-right vs bees.
    ``system_b.positions`` always reports Y.
    """

    system_a: ParticleState
    system_b: ParticleState
    shared_src: RandomSource
    comparison: Comparison
    frame_b: np.ndarray
    mu: float = 0.0
    pairing: str = "rank"
    debug: bool = False
    event_index: int = 0
    permutations: List[tuple] = field(default_factory=list)
    debug_rows: List[list] = field(default_factory=list)

    @property
    def time(self) -> float:
        return self.system_a.time

    @property
    def rank_offset(self) -> int:
        return self.system_b.n - self.system_a.n

    def compared_values(self) -> tuple[np.ndarray, np.ndarray]:
        """Rank-aligned (a, b) arrays the declared comparison applies to."""
        a = self.system_a.positions[:, 0]
        b = self.frame_b[self.rank_offset :]
        return a, b

    def _increments(self, u: np.ndarray, size: int, dt: float) -> np.ndarray:
        return math.sqrt(dt) * special.ndtri(open_uniforms(u[2 : 2 + size]))

    def _paired(self, z: np.ndarray) -> np.ndarray:
        tail = z[self.rank_offset :]
        return tail[::-1] if self.pairing == "reversed" else tail

    def advance(self) -> None:
        """Advance both systems to the next shared event."""
        size = self.system_b.n
        u = self.shared_src.uniforms(2 + size)
        gap = -math.log1p(-float(u[0])) / size
        z = self._increments(u, size, gap)

        a = self.system_a.positions[:, 0] + self._paired(z)
        b = self.frame_b + z
        time = self.system_a.time + gap
        order_a = np.argsort(a, kind="stable")
        order_b = np.argsort(b, kind="stable")
        a = a[order_a]
        b = b[order_b]
        k = min(int(float(u[1]) * size), size - 1)

        if self.comparison is Comparison.COMPONENTWISE_LEQ:
            victim_b = select_victim(b, self.system_b.rule)
            b[victim_b] = b[k]
            ka = k - self.rank_offset
            if ka >= 0:
                victim_a = select_victim(a, self.system_a.rule)
                a[victim_a] = a[ka]
        else:
            victim_a = select_victim(a, self.system_a.rule)
            victim_b = select_victim(b + self.mu * time, self.system_b.rule)
            a[victim_a] = a[k]
            b[victim_b] = b[k]
        a.sort(kind="stable")
        b.sort(kind="stable")

        self.system_a.time = time
        self.system_b.time = time
        self.system_a.positions = a[:, None]
        self.frame_b = b
        if self.comparison is Comparison.SHIFTED_LEQ:
            self.system_b.positions = (b + self.mu * time)[:, None]
        else:
            self.system_b.positions = b[:, None]
        self.event_index += 1

        if self.debug:
            self.permutations.append((self.event_index, order_a.tolist(), order_b.tolist()))
            left, right = self.compared_values()
            for rank, (value_a, value_b) in enumerate(zip(left, right)):
                self.debug_rows.append([self.event_index, rank, float(value_a), float(value_b), float(value_b - value_a)])

    def debug_table(self) -> ResultTable:
        return ResultTable("coupling_debug", ["event_index", "rank", "value_a", "value_b", "slack"], list(self.debug_rows))


def _kill_left_state(n: int, init: Sequence[float], label: str) -> ParticleState:
    if len(init) != n:
        raise ConfigurationError(f"{label} has {len(init)} points, expected {n}")
    return new_system(n, 1, list(init), ScoreRule.of(RuleKind.KILL_LEFT))


def couple_monotone(
    n: int,
    n_prime: int,
    init_a: Sequence[float],
    init_b: Sequence[float],
    src: RandomSource,
    *,
    debug: bool = False,
    pairing: str = "rank",
) -> CoupledPair:
    """Couple kill-left systems of sizes n <= n' so the smaller is dominated rank by rank."""
    if not 1 <= n <= n_prime:
        raise ConfigurationError(f"monotone coupling needs 1 <= n <= n_prime (got n={n}, n_prime={n_prime})")
    if pairing not in PAIRINGS:
        raise ConfigurationError(f"pairing must be one of {PAIRINGS} (got {pairing!r})")
    system_a = _kill_left_state(n, init_a, "init_a")
    system_b = _kill_left_state(n_prime, init_b, "init_b")
    pair = CoupledPair(
        system_a=system_a,
        system_b=system_b,
        shared_src=src,
        comparison=Comparison.COMPONENTWISE_LEQ,
        frame_b=system_b.positions[:, 0].copy(),
        pairing=pairing,
        debug=debug,
    )
    check = assert_coupling_invariant(pair)
    if not check.ok:
        raise PreconditionError(
            f"initial condition is not ordered for the monotone coupling: {check.describe()}",
            details={"rank": check.rank, "value_a": check.value_a, "value_b": check.value_b},
        )
    return pair


def couple_bees_to_killright(
    n: int,
    mu: float,
    init: Sequence[float],
    src: RandomSource,
    *,
    init_b: Sequence[float] | None = None,
    debug: bool = False,
    pairing: str = "rank",
) -> CoupledPair:
    """Couple a driftless kill-right N-BBM (side a) with drifted bees (side b)."""
    if pairing not in PAIRINGS:
        raise ConfigurationError(f"pairing must be one of {PAIRINGS} (got {pairing!r})")
    if init_b is not None and sorted(float(x) for x in init_b) != sorted(float(x) for x in init):
        raise PreconditionError("kill-right vs bees coupling requires identical initial conditions")
    if len(init) != n:
        raise ConfigurationError(f"init has {len(init)} points, expected {n}")
    system_a = new_system(n, 1, list(init), ScoreRule.of(RuleKind.KILL_RIGHT))
    system_b = new_system(n, 1, list(init), ScoreRule.of(RuleKind.BEES), drift=float(mu))
    return CoupledPair(
        system_a=system_a,
        system_b=system_b,
        shared_src=src,
        comparison=Comparison.SHIFTED_LEQ,
        frame_b=system_b.positions[:, 0].copy(),
        mu=float(mu),
        pairing=pairing,
        debug=debug,
    )


def assert_coupling_invariant(pair: CoupledPair) -> CouplingCheck:
    """Check the declared comparison at the pair's current event time."""
    a, b = pair.compared_values()
    excess = a - b
    bad = np.flatnonzero(excess > 0.0)
    if bad.size == 0:
        return CouplingCheck(ok=True, event_index=pair.event_index, event_time=pair.time)
    rank = int(bad[0])
    return CouplingCheck(
        ok=False,
        event_index=pair.event_index,
        event_time=pair.time,
        rank=rank,
        value_a=float(a[rank]),
        value_b=float(b[rank]),
        numerical_alarm=bool(float(excess[bad].max()) < NUMERICAL_ALARM),
    )


def run_coupling(pair: CoupledPair, events: int) -> CouplingReport:
    """Advance ``events`` steps, checking the invariant after each one."""
    violations = 0
    alarms = 0
    first: CouplingCheck | None = None
    for _ in range(int(events)):
        pair.advance()
        check = assert_coupling_invariant(pair)
        if check.ok:
            continue
        if check.numerical_alarm:
            alarms += 1
        else:
            violations += 1
        if first is None:
            first = check
            LOGGER.warning("coupling check failed: %s", check.describe())
    return CouplingReport(events=int(events), violations=violations, alarms=alarms, first_violation=first)


__all__ = [
    "Comparison",
    "CoupledPair",
    "CouplingCheck",
    "CouplingReport",
    "assert_coupling_invariant",
    "couple_bees_to_killright",
    "couple_monotone",
    "run_coupling",
]
