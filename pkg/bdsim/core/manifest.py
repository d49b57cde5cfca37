"""Run manifests: everything needed to re-run an experiment bit-exactly."""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from bdsim.core.errors import ConfigurationError

SCHEMA_VERSION = "1.0"
REPLICATE_RULE = "replicate i uses RandomSource(master_seed, stream_id=i)"
SWEEP_RULE = "sweep point j uses master_seed XOR splitmix64(j)"


class CriticalSpeedRecord(BaseModel):
    n: int
    rule: str
    speed: float
    stderr: float
    horizon: float
    reps: int
    source: str = "pilot"


class SeedDerivation(BaseModel):
    master_seed: int
    replicate_rule: str = REPLICATE_RULE
    sweep_rule: str | None = None
    point_seeds: List[int] = Field(default_factory=list)


class RunManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    version: str
    command: str
    config: Dict[str, Any]
    seeds: SeedDerivation
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    wall_clock_seconds: float = Field(default=0.0, ge=0.0)
    outputs: Dict[str, str] = Field(default_factory=dict, description="file name -> sha256")
    critical_speeds: List[CriticalSpeedRecord] = Field(default_factory=list)


def write_manifest(manifest: RunManifest, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_manifest(path: Path) -> RunManifest:
    path = Path(path)
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValidationError) as exc:
        raise ConfigurationError(f"cannot read run manifest {path}: {exc}") from exc


__all__ = [
    "CriticalSpeedRecord",
    "RunManifest",
    "SCHEMA_VERSION",
    "SeedDerivation",
    "load_manifest",
    "write_manifest",
]
