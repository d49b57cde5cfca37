"""
Typed configuration for bdsim experiments.

`ExperimentConfig` is the flat key set shared by the JSON/YAML config files,
the CLI flags and the `config` block of every run manifest. Values resolve as
model defaults < config file < explicit flags.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from bdsim.core.errors import ConfigurationError
from bdsim.core.validation import validation
from bdsim.simulation.rules import RuleKind, ScoreRule
from bdsim.utils.split_fields import parse_float_grid

COMMANDS = (
    "simulate",
    "speed",
    "diameter",
    "renewal-n2",
    "random-sum",
    "hitting",
    "escape",
    "stationarity",
    "recurrence",
    "couple-monotone",
    "couple-killright",
    "bbm-many-to-one",
    "bbm-radius",
    "sweep",
)
CommandName = Literal[
    "simulate",
    "speed",
    "diameter",
    "renewal-n2",
    "random-sum",
    "hitting",
    "escape",
    "stationarity",
    "recurrence",
    "couple-monotone",
    "couple-killright",
    "bbm-many-to-one",
    "bbm-radius",
    "sweep",
]
SWEEP_AXES = ("mu_grid", "n_grid", "r_grid")
# grids a command consumes itself; they never count as a sweep axis
NATIVE_GRIDS: Dict[str, tuple[str, ...]] = {
    "diameter": ("horizon_grid",),
    "random-sum": ("r_grid",),
    "hitting": ("r_grid",),
    "bbm-radius": ("x_grid", "holdout_grid"),
}
SEED_MAX = (1 << 64) - 1


class SimulationDefaults(BaseModel):
    """Numerical defaults shared by the simulator and the estimators."""

    model_config = ConfigDict(frozen=True)

    crossing_tol: float = Field(default=1e-6, gt=0.0)
    population_cap: int = Field(default=1_000_000, ge=1)
    burn_in: float = Field(default=500.0, ge=0.0)
    pilot_horizon: float = Field(default=2000.0, ge=100.0)
    pilot_reps: int = Field(default=32, ge=30)
    criticality_margin: float = Field(default=2.0, ge=0.0)
    min_speed_horizon: float = Field(default=100.0, gt=0.0)
    min_speed_reps: int = Field(default=30, ge=2)
    hitting_t_max: float = Field(default=1e5, gt=0.0)
    random_sum_pilot: int = Field(default=10_000, ge=100)


DEFAULTS = SimulationDefaults()


class ExperimentConfig(BaseModel):
    """One experiment. Unknown keys are rejected; hyphenated keys are accepted as aliases."""

    model_config = ConfigDict(extra="forbid")

    command: CommandName = "simulate"
    target: Optional[CommandName] = None

    n: int = Field(default=2, ge=1)
    n_prime: int = Field(default=4, ge=1)
    dimension: int = Field(default=1, ge=1)
    rule: str = "kill_left"
    width: Optional[float] = Field(default=None, gt=0.0)
    mu: float | List[float] = 0.0
    horizon: float = Field(default=2000.0, ge=0.0)
    reps: int = Field(default=200, ge=1)
    seed: int = Field(default=42, ge=0, le=SEED_MAX)
    threads: Optional[int] = Field(default=None, ge=1)

    init: Optional[List[Any]] = None
    init_a: Optional[List[float]] = None
    init_b: Optional[List[float]] = None

    mu_grid: List[float] = Field(default_factory=list)
    n_grid: List[int] = Field(default_factory=list)
    r_grid: List[float] = Field(default_factory=list)
    horizon_grid: List[float] = Field(default_factory=list)
    x_grid: List[float] = Field(default_factory=list)
    holdout_grid: List[float] = Field(default_factory=list)

    steps: int = Field(default=1000, ge=1)
    composition: Literal["shared_horizon", "independent_laplace"] = "shared_horizon"
    law: str = "n2_renewal"
    system_kind: Literal["nbbm_drift", "bees_drift"] = "nbbm_drift"
    t_max: float = Field(default=DEFAULTS.hitting_t_max, gt=0.0)

    burn_in: float = Field(default=DEFAULTS.burn_in, ge=0.0)
    sample_gap: float = Field(default=10.0, gt=0.0)
    samples: int = Field(default=1000, ge=2)
    chains: int = Field(default=50, ge=1)
    shared_randomness: bool = False

    events: int = Field(default=100_000, ge=0)
    pairing: Literal["rank", "reversed"] = "rank"
    debug: bool = False

    functional: str = "constant_one"
    t: float = Field(default=1.0, gt=0.0)
    t_law: str = "exponential:1"

    trajectory: bool = False
    cap: int = Field(default=DEFAULTS.population_cap, ge=1)
    crossing_tol: float = Field(default=DEFAULTS.crossing_tol, gt=0.0)
    critical_speed: Optional[float] = Field(default=None, ge=0.0)
    critical_speed_se: Optional[float] = Field(default=None, ge=0.0)
    pilot_horizon: float = Field(default=DEFAULTS.pilot_horizon, ge=100.0)
    pilot_reps: int = Field(default=DEFAULTS.pilot_reps, ge=30)
    output_dir: Optional[Path] = None

    @model_validator(mode="before")
    @classmethod
    def normalise_keys(cls, data: Any) -> Any:
        if isinstance(data, dict):
            return {str(key).replace("-", "_"): value for key, value in data.items()}
        return data

    @field_validator("rule", mode="before")
    @classmethod
    def canonical_rule(cls, value: Any) -> str:
        return RuleKind.parse(value).value

    @field_validator("mu_grid", "r_grid", "horizon_grid", "x_grid", "holdout_grid", "n_grid", mode="before")
    @classmethod
    def split_grid(cls, value: Any) -> Any:
        if value is None:
            return []
        return parse_float_grid(value) if isinstance(value, str) else value

    @field_validator("mu")
    @classmethod
    def finite_mu(cls, value: float | List[float]) -> float | List[float]:
        values = value if isinstance(value, list) else [value]
        if not values or any(not math.isfinite(float(item)) for item in values):
            raise ValueError(f"mu must be finite (got {value!r})")
        return value

    @field_validator("r_grid", "horizon_grid", "x_grid", "holdout_grid")
    @classmethod
    def increasing_grid(cls, value: List[float]) -> List[float]:
        if value:
            validation.validate_grid("grid", value, minimum=0.0)
        return value

    @field_validator("n_grid")
    @classmethod
    def positive_sizes(cls, value: List[int]) -> List[int]:
        if any(item < 1 for item in value):
            raise ValueError(f"n_grid values must be >= 1 (got {value})")
        return value

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        rule = ScoreRule.of(self.rule, self.width)
        mu = self.mu if isinstance(self.mu, list) else [self.mu]
        if len(mu) not in (1, self.dimension):
            raise ValueError(f"mu has {len(mu)} components, expected 1 or dimension={self.dimension}")
        if self.dimension > 1:
            if self.command != "simulate":
                raise ValueError(f"{self.command} supports dimension 1 only")
            rule.check_dimension(self.dimension)
        elif len(mu) > 1:
            raise ValueError("vector mu requires dimension > 1")
        if (self.critical_speed is None) != (self.critical_speed_se is None):
            raise ValueError("critical_speed and critical_speed_se must be given together")

        if self.command == "sweep":
            if self.target is None or self.target == "sweep":
                raise ValueError("sweep needs a target command other than sweep")
            axes = self._sweep_axes()
            if len(axes) != 1:
                found = ", ".join(axes) or "none"
                raise ValueError(f"sweep needs exactly one non-empty grid axis among {SWEEP_AXES} (found: {found})")
        else:
            native = NATIVE_GRIDS.get(self.command, ())
            stray = [axis for axis in SWEEP_AXES if axis not in native and getattr(self, axis)]
            if stray:
                raise ValueError(f"{', '.join(stray)} only apply to sweep")
        return self

    def _sweep_axes(self) -> List[str]:
        # a target's own r_grid is only the sweep axis when nothing else is swept
        axes = [axis for axis in SWEEP_AXES if getattr(self, axis)]
        if "r_grid" in NATIVE_GRIDS.get(self.target or "", ()) and len(axes) > 1:
            axes.remove("r_grid")
        return axes

    @property
    def mu_scalar(self) -> float:
        return float(self.mu[0]) if isinstance(self.mu, list) else float(self.mu)

    @property
    def sweep_axis(self) -> Optional[str]:
        if self.command != "sweep":
            return None
        return self._sweep_axes()[0]

    def echo(self) -> Dict[str, Any]:
        """JSON-ready config block for manifests."""
        return self.model_dump(mode="json", exclude={"output_dir"})


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        field = ".".join(str(loc) for loc in error["loc"]) or "config"
        parts.append(f"{field}: {error['msg']}")
    return "; ".join(parts)


def validate_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid experiment config: {_format_errors(exc)}") from exc


def read_config_file(path: Path) -> Dict[str, Any]:
    """Load a config mapping; a run manifest contributes its ``config`` block."""
    data = validation.validate_config_file(path).data or {}
    if isinstance(data.get("config"), dict) and "schema_version" in data:
        return dict(data["config"])
    return dict(data)


def load_experiment_config(path: Path | None = None, overrides: Dict[str, Any] | None = None) -> ExperimentConfig:
    """Resolve defaults < file < overrides; ``None`` override values are ignored."""
    payload: Dict[str, Any] = read_config_file(path) if path is not None else {}
    payload = {str(key).replace("-", "_"): value for key, value in payload.items()}
    for key, value in (overrides or {}).items():
        if value is not None:
            payload[str(key).replace("-", "_")] = value
    return validate_experiment_config(payload)


__all__ = [
    "COMMANDS",
    "DEFAULTS",
    "ExperimentConfig",
    "NATIVE_GRIDS",
    "SWEEP_AXES",
    "SimulationDefaults",
    "load_experiment_config",
    "read_config_file",
    "validate_experiment_config",
]
