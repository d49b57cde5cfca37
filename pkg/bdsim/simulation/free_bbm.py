"""Free branching Brownian motion (no selection) and its statistical checks.

Particles move as standard Brownian motions and branch into two at rate 1.
The forest is simulated segment by segment: every segment draws exactly three
uniforms (lifetime, Gaussian endpoint, sup coin). A segment ends at the
branch time or at the horizon; on a branch the label continues and one new
child label starts at the same point. Pending segments are processed in
first-in first-out batches, so the forest is a deterministic function of the
stream.

The sup coin of a segment is compared with the bridge law of sup |X| over
that segment, which gives exact path functionals (radius, sup indicators)
without sub-stepping.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import special, stats

from bdsim.core.errors import ConfigurationError, PreconditionError, ResourceCapError, require_positive
from bdsim.core.validation import validation
from bdsim.estimators.replicates import run_replicates
from bdsim.estimators.stats import LinearFit, MomentAccumulator, fit_line, z_score
from bdsim.utils.split_fields import parse_tagged
from bdsim.utils.tables import ResultTable

from .kernel import RandomSource, abs_sup_survival, open_uniforms, sup_abs_exceedance_probability
from .particles import DEFAULT_POPULATION_CAP, advance_to_next_event, new_system
from .rules import RuleKind, ScoreRule, select_victim

LOGGER = logging.getLogger("bdsim.free_bbm")
NO_CHILD = -1
FUNCTIONALS = ("constant_one", "terminal_exceeds", "indicator_sup_exceeds")
HORIZON_LAWS = ("fixed", "exponential")


@dataclass(slots=True)
class BbmForest:
    """A simulated forest at time ``time``.

    Segment arrays are index-aligned in processing order; ``seg_child`` holds
    the label born at the end of a segment (or -1).
    """

    time: float
    cap: int
    start: float
    alive: List[Tuple[int, float]]
    parents: Dict[int, Tuple[int, float]]
    seg_label: np.ndarray
    seg_dt: np.ndarray
    seg_from: np.ndarray
    seg_to: np.ndarray
    seg_coin: np.ndarray
    seg_child: np.ndarray

    @property
    def population(self) -> int:
        return len(self.alive)

    @property
    def branch_count(self) -> int:
        return len(self.parents)

    @property
    def labels_ever(self) -> int:
        return 1 + len(self.parents)

    @property
    def positions(self) -> np.ndarray:
        return np.asarray([position for _, position in self.alive], dtype=float)

    def segment_exceeds(self, x: float) -> np.ndarray:
        """Per segment: did sup |X| over the segment reach ``x``?"""
        hit = np.maximum(np.abs(self.seg_from), np.abs(self.seg_to)) >= x
        moving = (~hit) & (self.seg_dt > 0.0)
        if np.any(moving):
            survival = abs_sup_survival(self.seg_from[moving], self.seg_to[moving], self.seg_dt[moving], np.full(int(moving.sum()), x))
            hit[moving] = self.seg_coin[moving] >= survival
        return hit

    def radius_exceeds(self, x: float) -> bool:
        """R_t >= x, where R_t is the running sup of |X_u| over every particle."""
        return bool(self.segment_exceeds(x).any())

    def path_exceeds(self, x: float) -> Dict[int, bool]:
        """For every alive label: did its ancestral path reach |X| >= x before ``time``?"""
        hit = self.segment_exceeds(x)
        flags: Dict[int, bool] = {}
        for index in range(self.seg_label.size):
            label = int(self.seg_label[index])
            flags[label] = flags.get(label, False) or bool(hit[index])
            child = int(self.seg_child[index])
            if child != NO_CHILD:
                flags[child] = flags[label]
        return {label: flags[label] for label, _ in self.alive}

    def to_graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_node(0, birth=0.0)
        for child, (parent, born) in self.parents.items():
            graph.add_node(child, birth=born)
            graph.add_edge(parent, child, time=born)
        return graph

    def to_newick(self) -> str:
        """Binary Newick tree: each branch event splits a lineage into (continuation, child)."""
        graph = self.to_graph()

        def births(label: int) -> List[Tuple[float, int]]:
            return sorted((graph.edges[label, child]["time"], child) for child in graph.successors(label))

        def clade(label: int, events: List[Tuple[float, int]], index: int, since: float) -> str:
            if index == len(events):
                return f"{label}:{self.time - since:.17g}"
            born, child = events[index]
            left = clade(label, events, index + 1, born)
            right = clade(child, births(child), 0, born)
            return f"({left},{right}):{born - since:.17g}"

        return clade(0, births(0), 0, 0.0) + ";"


def simulate_bbm(t_end: float, src: RandomSource, cap: int = DEFAULT_POPULATION_CAP, *, start: float = 0.0) -> BbmForest:
    """Simulate a free BBM from one particle at ``start`` up to ``t_end``."""
    if t_end < 0.0:
        raise ConfigurationError(f"t_end must be >= 0 (got {t_end})")
    if cap < 1:
        raise ConfigurationError(f"cap must be >= 1 (got {cap})")

    labels = np.array([0], dtype=np.int64)
    starts = np.array([0.0])
    points = np.array([float(start)])
    next_label = 1
    parents: Dict[int, Tuple[int, float]] = {}
    alive: List[Tuple[int, float]] = []
    chunks: List[Tuple[np.ndarray, ...]] = []

    while labels.size:
        m = labels.size
        u = src.uniforms(3 * m).reshape(m, 3)
        life = -np.log1p(-u[:, 0])
        branched = starts + life < t_end
        ends = np.where(branched, starts + life, t_end)
        dt = ends - starts
        targets = points + np.sqrt(dt) * special.ndtri(open_uniforms(u[:, 1]))

        children = np.full(m, NO_CHILD, dtype=np.int64)
        births = int(branched.sum())
        if next_label + births > cap:
            raise ResourceCapError(
                f"free BBM population exceeded cap {cap} before t={t_end:.6g}",
                details={"cap": cap, "population": next_label + births},
            )
        children[branched] = np.arange(next_label, next_label + births, dtype=np.int64)
        next_label += births
        chunks.append((labels, dt, points, targets, u[:, 2], children))

        for index in np.flatnonzero(~branched):
            alive.append((int(labels[index]), float(targets[index])))
        for index in np.flatnonzero(branched):
            parents[int(children[index])] = (int(labels[index]), float(ends[index]))

        # continuation then child, per branched segment
        branch_idx = np.flatnonzero(branched)
        labels = np.column_stack([labels[branch_idx], children[branch_idx]]).ravel()
        starts = np.repeat(ends[branch_idx], 2)
        points = np.repeat(targets[branch_idx], 2)

    columns = [np.concatenate(parts) for parts in zip(*chunks)]
    alive.sort()
    forest = BbmForest(
        time=float(t_end),
        cap=int(cap),
        start=float(start),
        alive=alive,
        parents=parents,
        seg_label=columns[0],
        seg_dt=columns[1],
        seg_from=columns[2],
        seg_to=columns[3],
        seg_coin=columns[4],
        seg_child=columns[5],
    )
    LOGGER.debug("free BBM to t=%.6g: population %d, %d segments", t_end, forest.population, forest.seg_label.size)
    return forest


# ============== Many-to-one ==============


@dataclass(frozen=True, slots=True)
class Functional:
    """Built-in path functional F; ``level`` is the threshold x where one applies."""

    kind: str
    level: float = 0.0

    @classmethod
    def parse(cls, functional_id: str) -> "Functional":
        kind, level = parse_tagged(functional_id, name="functional")
        if kind not in FUNCTIONALS:
            raise ConfigurationError(f"unknown functional {functional_id!r}; expected one of {FUNCTIONALS}")
        if kind == "constant_one":
            return cls(kind)
        if level is None:
            raise ConfigurationError(f"functional {kind} needs a level, e.g. {kind}:1.0")
        return cls(kind, float(level))

    @property
    def label(self) -> str:
        return self.kind if self.kind == "constant_one" else f"{self.kind}({self.level:g})"

    def over_forest(self, forest: BbmForest) -> float:
        """Sum of F over the particles alive at the forest's time."""
        if self.kind == "constant_one":
            return float(forest.population)
        if self.kind == "terminal_exceeds":
            return float(np.count_nonzero(forest.positions >= self.level))
        return float(sum(forest.path_exceeds(self.level).values()))

    def over_brownian(self, t: float, src: RandomSource) -> float:
        """F on one standard Brownian path on [0, t]; consumes two uniforms."""
        u = src.uniforms(2)
        end = math.sqrt(t) * float(special.ndtri(open_uniforms(u[:1]))[0])
        if self.kind == "constant_one":
            return 1.0
        if self.kind == "terminal_exceeds":
            return float(end >= self.level)
        if abs(end) >= self.level:
            return 1.0
        return float(u[1] >= float(abs_sup_survival(0.0, end, t, self.level)))

    def expected_sum(self, t: float) -> float:
        """Closed-form e^t E[F(B)]."""
        growth = math.exp(t)
        if self.kind == "constant_one":
            return growth
        if self.kind == "terminal_exceeds":
            return growth * float(stats.norm.sf(self.level / math.sqrt(t)))
        return growth * sup_abs_exceedance_probability(self.level, t)


@dataclass(frozen=True, slots=True)
class ManyToOneResult:
    functional: str
    t: float
    reps: int
    lhs_estimate: float
    lhs_stderr: float
    rhs_estimate: float
    rhs_stderr: float
    z_score: float
    oracle: float


def _forest_sum(functional: Functional, t: float, cap: int, src: RandomSource) -> float:
    return functional.over_forest(simulate_bbm(t, src, cap))


def _brownian_value(functional: Functional, t: float, src: RandomSource) -> float:
    return functional.over_brownian(t, src)


def many_to_one_check(
    functional_id: str,
    t: float,
    reps: int,
    src: RandomSource,
    *,
    cap: int = DEFAULT_POPULATION_CAP,
    threads: int = 1,
    progress: bool = False,
) -> ManyToOneResult:
    """Compare E[sum over N(t) of F] with e^t E[F(B)], both by Monte Carlo."""
    functional = Functional.parse(functional_id)
    t = require_positive("t", t)
    forest_sums = run_replicates(
        partial(_forest_sum, functional, t, cap), src.fork("forest"), reps, threads=threads, progress=progress, desc="forests"
    )
    singles = run_replicates(
        partial(_brownian_value, functional, t), src.fork("brownian"), reps, threads=threads, progress=progress, desc="paths"
    )
    lhs = MomentAccumulator.from_values(forest_sums)
    single = MomentAccumulator.from_values(singles)
    growth = math.exp(t)
    rhs, rhs_se = growth * single.mean, growth * single.standard_error
    return ManyToOneResult(
        functional=functional.label,
        t=t,
        reps=int(reps),
        lhs_estimate=lhs.mean,
        lhs_stderr=lhs.standard_error,
        rhs_estimate=rhs,
        rhs_stderr=rhs_se,
        z_score=z_score(lhs.mean, lhs.standard_error, rhs, rhs_se),
        oracle=functional.expected_sum(t),
    )


# ============== Radius tail ==============


@dataclass(frozen=True, slots=True)
class HorizonLaw:
    """``fixed:t`` or ``exponential:rate``; random horizons are drawn independently of the forest."""

    kind: str
    value: float

    @classmethod
    def parse(cls, text: "str | HorizonLaw") -> "HorizonLaw":
        if isinstance(text, HorizonLaw):
            return text
        kind, value = parse_tagged(text, name="horizon law")
        if kind not in HORIZON_LAWS or value is None:
            raise ConfigurationError(f"horizon law must be fixed:<t> or exponential:<rate> (got {text!r})")
        if kind == "fixed" and value < 0.0:
            raise ConfigurationError(f"fixed horizon must be >= 0 (got {value})")
        if kind == "exponential":
            require_positive("exponential rate", value)
        return cls(kind, float(value))

    def draw(self, src: RandomSource) -> float:
        if self.kind == "fixed":
            return self.value
        return -math.log1p(-src.uniform()) / self.value


def _radius_flags(law: HorizonLaw, xs: Tuple[float, ...], cap: int, src: RandomSource) -> List[bool]:
    horizon = law.draw(src.child("horizon"))
    forest = simulate_bbm(horizon, src, cap)
    return [forest.radius_exceeds(x) for x in xs]


def radius_tail_profile(
    t_law: "str | HorizonLaw",
    xs: Sequence[float],
    reps: int,
    src: RandomSource,
    *,
    cap: int = DEFAULT_POPULATION_CAP,
    threads: int = 1,
    progress: bool = False,
) -> ResultTable:
    """Empirical P(R_T >= x) on the grid ``xs``; columns ``x,empirical_tail,stderr``."""
    law = HorizonLaw.parse(t_law)
    grid = validation.validate_grid("xs", xs, minimum=0.0, strict_minimum=True).data
    flags = run_replicates(
        partial(_radius_flags, law, tuple(grid), cap), src, reps, threads=threads, progress=progress, desc="radius"
    )
    hits = np.asarray(flags, dtype=float).reshape(int(reps), len(grid))
    table = ResultTable("radius_tail", ["x", "empirical_tail", "stderr"])
    for column, x in enumerate(grid):
        tail = float(hits[:, column].mean())
        table.append(x, tail, math.sqrt(tail * (1.0 - tail) / reps))
    return table


@dataclass(frozen=True, slots=True)
class HoldoutPoint:
    x: float
    empirical_tail: float
    stderr: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.empirical_tail <= self.bound + 2.0 * self.stderr


@dataclass(frozen=True, slots=True)
class RadiusTailFit:
    """log P(R_T >= x) against sqrt(x), plus the envelope e^{-c sqrt(x)} checked on held-out points."""

    fit: LinearFit
    envelope_c: float
    holdout: Tuple[HoldoutPoint, ...]

    @property
    def slope(self) -> float:
        return self.fit.slope

    @property
    def slope_ci95(self) -> Tuple[float, float]:
        return self.fit.slope_ci95()

    @property
    def slope_negative(self) -> bool:
        hi = self.slope_ci95[1]
        return self.fit.slope < 0.0 and not math.isnan(hi) and hi < 0.0

    @property
    def holdout_ok(self) -> bool:
        return all(point.ok for point in self.holdout)


def fit_radius_tail(table: ResultTable, holdout_xs: Sequence[float] = ()) -> RadiusTailFit:
    """Fit rows not listed in ``holdout_xs``; check the held-out rows against the fitted envelope."""
    held = {float(x) for x in holdout_xs}
    fit_rows = [row for row in table.rows if float(row[0]) not in held and float(row[1]) > 0.0]
    if len(fit_rows) < 2:
        raise PreconditionError("radius tail fit needs at least two grid points with a positive empirical tail")
    roots = [math.sqrt(float(row[0])) for row in fit_rows]
    logs = [math.log(float(row[1])) for row in fit_rows]
    fit = fit_line(roots, logs)
    envelope_c = min(-value / root for value, root in zip(logs, roots))
    holdout = tuple(
        HoldoutPoint(float(row[0]), float(row[1]), float(row[2]), math.exp(-envelope_c * math.sqrt(float(row[0]))))
        for row in table.rows
        if float(row[0]) in held
    )
    return RadiusTailFit(fit=fit, envelope_c=envelope_c, holdout=holdout)


# ============== Embedded selection ==============


@dataclass(slots=True)
class EmbeddingCheck:
    """Comparison of a kill-left N-BBM with the sub-population a free BBM selects on the same randomness."""

    n: int
    events: int = 0
    violations: int = 0
    first_violation_event: int | None = None
    max_discrepancy: float = 0.0
    max_population: int = 1
    selected_positions: List[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _free_step(points: np.ndarray, dt: float, src: RandomSource, cap: int) -> np.ndarray:
    if dt <= 0.0 or points.size == 0:
        return points
    return np.concatenate([simulate_bbm(dt, src, cap, start=float(x)).positions for x in points])


def embedded_selection_trace(
    n: int,
    t_end: float,
    src: RandomSource,
    *,
    init: Sequence[float] | None = None,
    cap: int = DEFAULT_POPULATION_CAP,
) -> EmbeddingCheck:
    """Carve a kill-left N-BBM out of a free BBM and check it event by event.

    The N-BBM runs through `advance_to_next_event` on ``src``. The forest is
    simulated on its own from a twin of ``src``, so its selected particles see
    the same clock, branch index and increments. At every branching the rule
    deselects one selected particle, whose line then evolves as a free BBM on
    ``src.child("free")``. After every event the N-BBM positions must equal the
    selected positions exactly.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1 (got {n})")
    start = np.zeros(n) if init is None else np.asarray(list(init), dtype=float)
    if start.size != n:
        raise ConfigurationError(f"init has {start.size} points, expected {n}")
    rule = ScoreRule.of(RuleKind.KILL_LEFT)
    system = new_system(n, 1, start.tolist(), rule)

    twin = RandomSource(src.master_seed, src.stream_id)
    if src.counter:
        twin.uniforms(src.counter)
    free_src = src.child("free")
    selected = np.sort(start)
    extras = np.empty(0)
    time = 0.0
    check = EmbeddingCheck(n=n, max_population=n)

    while time < t_end:
        advance_to_next_event(system, src, t_limit=t_end)
        u = twin.uniforms(2 + n)
        gap = -math.log1p(-float(u[0])) / n
        clipped = time + gap > t_end
        dt = t_end - time if clipped else gap
        if dt > 0.0:
            selected = np.sort(selected + math.sqrt(dt) * special.ndtri(open_uniforms(u[2:])))
        extras = _free_step(extras, dt, free_src, cap)
        time = t_end if clipped else time + gap
        if not clipped:
            k = min(int(float(u[1]) * n), n - 1)
            grown = np.append(selected, selected[k])
            drop = select_victim(grown[:, None], rule, time)
            extras = np.append(extras, grown[drop])
            selected = np.sort(np.delete(grown, drop))
            check.events += 1
        population = selected.size + extras.size
        if population > cap:
            raise ResourceCapError(f"free BBM population exceeded cap {cap}", details={"cap": cap, "population": population})
        check.max_population = max(check.max_population, population)

        gap_to_system = float(np.max(np.abs(np.sort(system.values) - selected)))
        check.max_discrepancy = max(check.max_discrepancy, gap_to_system)
        if gap_to_system != 0.0:
            check.violations += 1
            if check.first_violation_event is None:
                check.first_violation_event = check.events
                LOGGER.warning("embedded N-BBM left the selected forest at event %d (gap %.3g)", check.events, gap_to_system)
    check.selected_positions = selected.tolist()
    return check


__all__ = [
    "BbmForest",
    "EmbeddingCheck",
    "Functional",
    "HorizonLaw",
    "ManyToOneResult",
    "RadiusTailFit",
    "embedded_selection_trace",
    "fit_radius_tail",
    "many_to_one_check",
    "radius_tail_profile",
    "simulate_bbm",
]
