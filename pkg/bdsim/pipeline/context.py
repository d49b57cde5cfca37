"""Shared context objects for a bdsim run."""

from __future__ import annotations

from pathlib import Path
from typing import Dict

from pydantic import BaseModel, ConfigDict, Field, field_validator

from bdsim.core.config import ExperimentConfig
from bdsim.core.provenance import ProvenanceLogger
from bdsim.estimators.speed import CriticalSpeedCache
from bdsim.simulation.kernel import RandomSource


class RunPaths(BaseModel):
    """Canonical files of one run."""

    repo_root: Path
    output_dir: Path

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("repo_root", "output_dir", mode="before")
    @classmethod
    def _expand(cls, value: Path | str) -> Path:
        return Path(value).expanduser().resolve()

    def ensure_directories(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)

    @property
    def manifest(self) -> Path:
        return self.output_dir / "manifest.json"

    @property
    def summary(self) -> Path:
        return self.output_dir / "summary.txt"

    @property
    def provenance(self) -> Path:
        return self.output_dir / "provenance.jsonl"


class RunContext(BaseModel):
    """Aggregated runtime context for one experiment (or one sweep)."""

    config: ExperimentConfig
    paths: RunPaths
    env: Dict[str, str] = Field(default_factory=dict)
    provenance: ProvenanceLogger
    src: RandomSource
    critical: CriticalSpeedCache
    threads: int = Field(default=1, ge=1)
    quiet: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def progress(self) -> bool:
        return not self.quiet
