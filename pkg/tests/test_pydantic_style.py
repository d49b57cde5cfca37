"""Pydantic v2 conventions for bdsim models: v2 validators, closed input schemas, frozen results."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

import pytest
from pydantic import BaseModel, ValidationError

from bdsim.core.config import DEFAULTS, ExperimentConfig, SimulationDefaults, validate_experiment_config
from bdsim.core.errors import ConfigurationError
from bdsim.core.manifest import CriticalSpeedRecord, RunManifest, SeedDerivation
from bdsim.core.provenance import ProvenanceEvent
from bdsim.estimators.stats import EstimateReport
from bdsim.pipeline.context import RunContext, RunPaths

TARGET_DIRS: tuple[str, ...] = ("bdsim", "scripts", "tests")
LEGACY_PATTERNS: tuple[tuple[str, re.Pattern[str]], ...] = (
    ("legacy decorator", re.compile(r"@(?:root_)?validator\b")),
    ("legacy import", re.compile(r"\bfrom\s+pydantic\s+import\b[^\n]*\bvalidator\b")),
    ("inner Config class", re.compile(r"^\s+class Config\s*:", re.MULTILINE)),
    ("legacy parse helper", re.compile(r"\.parse_(?:obj|raw|file)\(")),
)
MODELS: tuple[type[BaseModel], ...] = (
    ExperimentConfig,
    SimulationDefaults,
    RunManifest,
    SeedDerivation,
    CriticalSpeedRecord,
    ProvenanceEvent,
    EstimateReport,
    RunPaths,
    RunContext,
)


def _python_files(base_dirs: Iterable[Path]) -> Iterable[Path]:
    for directory in base_dirs:
        if directory.exists():
            yield from directory.rglob("*.py")


def test_no_v1_pydantic_idioms() -> None:
    repo_root = Path(__file__).resolve().parents[1]
    this_file = Path(__file__).resolve()
    offenders: list[str] = []

    for path in _python_files(repo_root / directory for directory in TARGET_DIRS):
        if path == this_file:
            continue
        text = path.read_text(encoding="utf-8")
        for label, pattern in LEGACY_PATTERNS:
            if pattern.search(text):
                offenders.append(f"{path.relative_to(repo_root)} -> {label}")
                break

    if offenders:
        formatted = "\n".join(offenders)
        pytest.fail(f"Legacy Pydantic usage detected:\n{formatted}")


@pytest.mark.parametrize("model", MODELS, ids=lambda model: model.__name__)
def test_models_use_config_dict(model: type[BaseModel]) -> None:
    assert isinstance(model.model_config, dict)
    assert "Config" not in vars(model)


@pytest.mark.parametrize("model", [ExperimentConfig, RunManifest], ids=lambda model: model.__name__)
def test_input_schemas_are_closed(model: type[BaseModel]) -> None:
    assert model.model_config.get("extra") == "forbid"


def test_unknown_config_key_is_a_configuration_error() -> None:
    with pytest.raises(ConfigurationError) as excinfo:
        validate_experiment_config({"command": "speed", "horizn": 100})
    assert "horizn" in str(excinfo.value)
    assert excinfo.value.exit_code == 2


def test_result_models_are_frozen() -> None:
    report = EstimateReport(point_estimate=0.5, standard_error=0.01, replicate_count=30, horizon=100.0)
    with pytest.raises(ValidationError):
        report.point_estimate = 0.6
    with pytest.raises(ValidationError):
        DEFAULTS.crossing_tol = 1.0
    assert report.ci95 == pytest.approx((0.5 - 1.96 * 0.01, 0.5 + 1.96 * 0.01))
