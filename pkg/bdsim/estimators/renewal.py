"""The N=2 renewal chain and first passage of discrete random sums.

For two kill-left particles, every effective event puts both particles on one
point. Between such events the pair evolves as two Brownian motions for an
Exp(1) time T (events ring at rate 2, half of them are no-ops), and the
common point then moves by

    L = max(B1(T), B2(T)) - mu T

with one horizon T shared by both motions. E[L] = E[sqrt(T)] E[max(Z1, Z2)] - mu
= 1/2 - mu. The ``independent_laplace`` composition draws the two Laplace
marginals independently instead; its mean is 3/(4 sqrt 2) - mu.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy import special

from bdsim.core.config import DEFAULTS
from bdsim.core.errors import ConfigurationError, PreconditionError, ResourceCapError
from bdsim.core.validation import validation
from bdsim.simulation.kernel import RandomSource, open_uniforms
from bdsim.simulation.observers import RenewalExtractor
from bdsim.simulation.particles import advance_to_next_event, new_system
from bdsim.simulation.rules import RuleKind, ScoreRule
from bdsim.utils.split_fields import parse_tagged
from bdsim.utils.tables import ResultTable

from .replicates import run_replicates
from .stats import KsResult, LinearFit, MomentAccumulator, fit_line, two_sample_ks

LOGGER = logging.getLogger("bdsim.renewal")
COMPOSITIONS = ("shared_horizon", "independent_laplace")
RANDOM_SUM_LAWS = ("constant_one", "normal_shift", "n2_renewal")
WALK_BLOCK = 256
MAX_WALK_STEPS = 10_000_000


def _exponential(u: np.ndarray) -> np.ndarray:
    # strictly positive gaps
    return -np.log1p(-open_uniforms(u))


def _laplace(u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the Laplace law with density exp(-sqrt(2)|z|)/sqrt(2)."""
    v = open_uniforms(u)
    return np.where(v < 0.5, np.log(2.0 * v), -np.log(2.0 * (1.0 - v))) / math.sqrt(2.0)


def compose_increments(mu: float, size: int, src: RandomSource, composition: str = "shared_horizon") -> Tuple[np.ndarray, np.ndarray]:
    """``size`` direct draws of (L, T); three uniforms per draw."""
    if composition not in COMPOSITIONS:
        raise ConfigurationError(f"composition must be one of {COMPOSITIONS} (got {composition!r})")
    u = src.uniforms(3 * size).reshape(size, 3)
    gaps = _exponential(u[:, 0])
    if composition == "shared_horizon":
        normals = special.ndtri(open_uniforms(u[:, 1:]))
        increments = np.sqrt(gaps) * normals.max(axis=1) - mu * gaps
    else:
        increments = np.maximum(_laplace(u[:, 1]), _laplace(u[:, 2])) - mu * gaps
    return increments, gaps


@dataclass(slots=True)
class RenewalChainSample:
    """Chain increments L_k and the gaps T_k - T_{k-1} between renewals."""

    increments: np.ndarray
    gaps: np.ndarray

    def __post_init__(self) -> None:
        if self.increments.shape != self.gaps.shape:
            raise ValueError("increments and gaps must be index-aligned")
        if np.any(self.gaps <= 0.0):
            raise ValueError("renewal gaps must be strictly positive")

    @property
    def size(self) -> int:
        return int(self.increments.size)

    def mean_increment(self) -> MomentAccumulator:
        return MomentAccumulator.from_values(self.increments)

    def ratio_estimate(self) -> Tuple[float, float]:
        """mean(L)/mean(T) and its delta-method standard error."""
        n = self.size
        mean_l = float(self.increments.mean())
        mean_t = float(self.gaps.mean())
        ratio = mean_l / mean_t
        if n < 2:
            return ratio, 0.0
        residual = self.increments - ratio * self.gaps
        return ratio, float(residual.std(ddof=1) / (mean_t * math.sqrt(n)))


@dataclass(slots=True)
class RenewalChainResult:
    mu: float
    composition: str
    direct: RenewalChainSample
    extracted: RenewalChainSample | None = None
    ks: KsResult | None = None

    def summary_table(self) -> ResultTable:
        table = ResultTable(
            "renewal_n2",
            ["source", "count", "mean_increment", "stderr", "mean_gap", "ratio", "ratio_stderr", "ks_statistic", "ks_pvalue"],
        )
        for source, sample in (("direct", self.direct), ("simulation", self.extracted)):
            if sample is None:
                continue
            acc = sample.mean_increment()
            ratio, ratio_se = sample.ratio_estimate()
            ks = self.ks if source == "simulation" else None
            table.append(
                source,
                sample.size,
                acc.mean,
                acc.standard_error,
                float(sample.gaps.mean()),
                ratio,
                ratio_se,
                ks.statistic if ks else None,
                ks.pvalue if ks else None,
            )
        return table


def _direct_chain(mu: float, steps: int, composition: str, src: RandomSource) -> Tuple[np.ndarray, np.ndarray]:
    return compose_increments(mu, steps, src, composition)


def _extracted_chain(mu: float, steps: int, src: RandomSource) -> Tuple[np.ndarray, np.ndarray]:
    state = new_system(2, 1, None, ScoreRule.of(RuleKind.KILL_LEFT), -mu)
    extractor = RenewalExtractor()
    extractor.on_start(state)
    while len(extractor.points) <= steps:
        advance_to_next_event(state, src, observers=[extractor])
    return extractor.increments[:steps], extractor.gaps[:steps]


def _stack(chains: List[Tuple[np.ndarray, np.ndarray]]) -> RenewalChainSample:
    return RenewalChainSample(np.concatenate([c[0] for c in chains]), np.concatenate([c[1] for c in chains]))


def n2_renewal_chain(
    mu: float,
    steps: int,
    reps: int,
    src: RandomSource,
    *,
    composition: str = "shared_horizon",
    simulate: bool = True,
    threads: int = 1,
    progress: bool = False,
) -> RenewalChainResult:
    """Sample ``reps`` chains of ``steps`` increments by direct composition.

    With ``simulate`` the same number of increments is extracted from full
    N=2 kill-left runs with drift -mu and compared by a two-sample KS test.
    """
    if steps < 1:
        raise ConfigurationError(f"steps must be >= 1 (got {steps})")
    direct = _stack(
        run_replicates(partial(_direct_chain, float(mu), steps, composition), src.fork("direct"), reps, threads=threads, desc="direct")
    )
    result = RenewalChainResult(mu=float(mu), composition=composition, direct=direct)
    if simulate:
        result.extracted = _stack(
            run_replicates(
                partial(_extracted_chain, float(mu), steps), src.fork("simulation"), reps, threads=threads, progress=progress, desc="N=2 runs"
            )
        )
        result.ks = two_sample_ks(direct.increments, result.extracted.increments)
    return result


# ============== Random sums ==============


@dataclass(frozen=True, slots=True)
class IncrementLaw:
    """Step law of a random walk S_n = L_1 + ... + L_n."""

    kind: str
    parameter: float

    @classmethod
    def parse(cls, law_id: str) -> "IncrementLaw":
        kind, value = parse_tagged(law_id, name="law")
        if kind not in RANDOM_SUM_LAWS:
            raise ConfigurationError(f"unknown random-sum law {law_id!r}; expected one of {RANDOM_SUM_LAWS}")
        defaults: Dict[str, float] = {"constant_one": 1.0, "normal_shift": 1.0, "n2_renewal": 0.0}
        return cls(kind, defaults[kind] if value is None else float(value))

    def sampler(self) -> Callable[[RandomSource, int], np.ndarray]:
        if self.kind == "constant_one":
            return lambda src, size: np.ones(size)
        if self.kind == "normal_shift":
            return lambda src, size: self.parameter + special.ndtri(open_uniforms(src.uniforms(size)))
        return lambda src, size: compose_increments(self.parameter, size, src)[0]


def first_passage_counts(levels: Sequence[float], sampler: Callable[[RandomSource, int], np.ndarray], src: RandomSource) -> List[int]:
    """tau_R = inf{n >= 0: S_n >= R} for every level on one walk (levels ascending)."""
    taus: List[int] = []
    remaining = list(levels)
    while remaining and remaining[0] <= 0.0:
        taus.append(0)
        remaining.pop(0)
    total = 0.0
    steps = 0
    while remaining:
        if steps >= MAX_WALK_STEPS:
            raise ResourceCapError(f"random walk did not reach {remaining[0]} within {MAX_WALK_STEPS} steps")
        partial_sums = total + np.cumsum(sampler(src, WALK_BLOCK))
        while remaining:
            reached = np.flatnonzero(partial_sums >= remaining[0])
            if reached.size == 0:
                break
            taus.append(steps + int(reached[0]) + 1)
            remaining.pop(0)
        total = float(partial_sums[-1])
        steps += WALK_BLOCK
    return taus


@dataclass(slots=True)
class FirstPassageResult:
    law: str
    pilot_mean: float
    table: ResultTable
    fit: LinearFit


def random_sum_first_passage(
    law_id: str,
    r_grid: Sequence[float],
    reps: int,
    src: RandomSource,
    *,
    pilot_draws: int = DEFAULTS.random_sum_pilot,
    threads: int = 1,
    progress: bool = False,
) -> FirstPassageResult:
    """Mean first passage E[tau_R] per level with a least-squares line; columns ``r,mean_tau,stderr``."""
    law = IncrementLaw.parse(law_id)
    grid = validation.validate_grid("r_grid", r_grid, minimum=0.0).data
    sampler = law.sampler()
    pilot_mean = float(sampler(src.fork("pilot"), pilot_draws).mean())
    if pilot_mean <= 0.0:
        raise PreconditionError(
            f"law {law_id!r} has non-positive empirical mean {pilot_mean:.6g}; first passage needs E[L] > 0",
            details={"pilot_mean": pilot_mean},
        )
    taus = np.asarray(
        run_replicates(partial(first_passage_counts, tuple(grid), sampler), src, reps, threads=threads, progress=progress, desc="walks"),
        dtype=float,
    )
    table = ResultTable("random_sum", ["r", "mean_tau", "stderr"])
    for column, level in enumerate(grid):
        acc = MomentAccumulator.from_values(taus[:, column])
        table.append(level, acc.mean, acc.standard_error)
    fit = fit_line(grid, table.column("mean_tau")) if len(grid) >= 2 else LinearFit(0.0, float(table.rows[0][1]), 1.0, 0.0, 0.0, 1)
    LOGGER.info("random sum %s: slope %.6g, R^2 %.6g", law_id, fit.slope, fit.r_squared)
    return FirstPassageResult(law=law_id, pilot_mean=pilot_mean, table=table, fit=fit)


__all__ = [
    "COMPOSITIONS",
    "FirstPassageResult",
    "IncrementLaw",
    "RenewalChainResult",
    "RenewalChainSample",
    "compose_increments",
    "first_passage_counts",
    "n2_renewal_chain",
    "random_sum_first_passage",
]
