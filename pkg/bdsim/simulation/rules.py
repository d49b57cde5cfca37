"""Selection rules (scores) and drift settings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from bdsim.core.errors import ConfigurationError


class RuleKind(str, Enum):
    KILL_LEFT = "kill_left"
    KILL_RIGHT = "kill_right"
    BEES = "bees"
    LBBM = "lbbm"

    @classmethod
    def parse(cls, value: "RuleKind | str") -> "RuleKind":
        if isinstance(value, RuleKind):
            return value
        normalized = str(value).strip().lower().replace("-", "_")
        try:
            return cls(normalized)
        except ValueError as exc:
            choices = ", ".join(kind.value for kind in cls)
            raise ConfigurationError(f"Unknown selection rule '{value}' (choose from {choices})") from exc


@dataclass(frozen=True, slots=True)
class ScoreRule:
    """Named selection policy; ``width`` is the L-BBM diameter L."""

    kind: RuleKind
    width: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", RuleKind.parse(self.kind))
        if self.kind is RuleKind.LBBM:
            if self.width is None or not self.width > 0.0 or not math.isfinite(self.width):
                raise ConfigurationError(f"lbbm requires a positive finite width L (got {self.width!r})")

    @classmethod
    def of(cls, kind: "RuleKind | str", width: float | None = None) -> "ScoreRule":
        return cls(RuleKind.parse(kind), width)

    @property
    def supports_multidimensional(self) -> bool:
        return self.kind is RuleKind.BEES

    def check_dimension(self, dimension: int) -> None:
        if dimension < 1:
            raise ConfigurationError(f"dimension must be >= 1 (got {dimension})")
        if dimension > 1 and not self.supports_multidimensional:
            raise ConfigurationError(f"rule {self.kind.value} requires dimension 1 (got {dimension})")


@dataclass(frozen=True, slots=True)
class DriftSpec:
    """Constant velocity added to every particle between events."""

    mu: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(value) for value in self.mu)
        if not values or any(not math.isfinite(value) for value in values):
            raise ConfigurationError(f"drift components must be finite (got {self.mu!r})")
        object.__setattr__(self, "mu", values)

    @classmethod
    def of(cls, mu: float | Sequence[float], dimension: int = 1) -> "DriftSpec":
        if isinstance(mu, (int, float)):
            return cls(tuple([float(mu)] * dimension))
        values = tuple(float(value) for value in mu)
        if len(values) == 1 and dimension > 1:
            values = values * dimension
        if len(values) != dimension:
            raise ConfigurationError(f"drift has {len(values)} components, expected {dimension}")
        return cls(values)

    @property
    def dimension(self) -> int:
        return len(self.mu)

    @property
    def is_zero(self) -> bool:
        return all(value == 0.0 for value in self.mu)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mu, dtype=float)


def scores(positions: np.ndarray, rule: ScoreRule) -> np.ndarray:
    """Score of each particle; the victim minimises it. ``positions`` has shape (n, d)."""
    if rule.kind is RuleKind.KILL_RIGHT:
        return -positions[:, 0]
    if rule.kind is RuleKind.BEES:
        if positions.shape[1] == 1:
            return -np.abs(positions[:, 0])
        return -np.linalg.norm(positions, axis=1)
    return positions[:, 0]


def sort_order(positions: np.ndarray, rule: ScoreRule) -> np.ndarray:
    """Stable ordering: ascending position in d=1, ascending score otherwise."""
    if positions.shape[1] == 1:
        return np.argsort(positions[:, 0], kind="stable")
    return np.argsort(scores(positions, rule), kind="stable")


def select_victim(positions, rule: ScoreRule, time: float = 0.0) -> int | None:
    """Index of the particle removed at an event, lowest index on ties.

    ``None`` means "no victim" and only occurs for lbbm when the leftmost
    particle is within L of the leader. ``time`` is accepted for rules whose
    score depends on it; the built-in scores do not.
    """
    array = np.asarray(positions, dtype=float)
    if array.ndim == 1:
        array = array[:, None]
    if array.shape[0] == 0:
        raise ConfigurationError("select_victim needs at least one particle")
    if rule.kind is RuleKind.LBBM:
        if rule.width is None or not rule.width > 0.0:
            raise ConfigurationError(f"lbbm requires a positive width L (got {rule.width!r})")
        column = array[:, 0]
        index = int(np.argmin(column))
        return index if float(column.max()) - float(column[index]) > rule.width else None
    return int(np.argmin(scores(array, rule)))


__all__ = ["DriftSpec", "RuleKind", "ScoreRule", "scores", "select_victim", "sort_order"]
