"""Lightweight JSONL provenance logger for experiment runs."""

from __future__ import annotations

import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator

from pydantic import BaseModel, Field


class ProvenanceEvent(BaseModel):
    """Structured record for run activity."""

    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    stage: str = Field(..., description="Run stage, e.g. 'bootstrap', 'pilot', 'run' or 'write'.")
    message: str = Field(..., description="Human-readable description of the event.")
    component: str = Field(default="bdsim")
    payload: Dict[str, Any] = Field(default_factory=dict)


class ProvenanceLogger:
    """Append-only JSONL logger for provenance and debugging."""

    def __init__(self, output_path: Path):
        self.output_path = output_path
        self.output_path.parent.mkdir(parents=True, exist_ok=True)
        self.stage_seconds: Dict[str, float] = {}

    def log(self, event: ProvenanceEvent | Dict[str, Any]) -> ProvenanceEvent:
        """Write a single event to disk and return the normalized object."""
        if not isinstance(event, ProvenanceEvent):
            event = ProvenanceEvent(**event)
        with self.output_path.open("a", encoding="utf-8") as handle:
            handle.write(event.model_dump_json() + "\n")
        return event

    def extend(self, events: Iterable[ProvenanceEvent | Dict[str, Any]]) -> None:
        """Batch-write multiple events."""
        for event in events:
            self.log(event)

    @contextmanager
    def stage(self, name: str, message: str, **payload: Any) -> Iterator[Dict[str, Any]]:
        """Log start/finish events around a block and record its elapsed seconds.

        The yielded dict is merged into the finishing event's payload, so the
        block can attach results (estimates, row counts) as it goes.
        """
        extra: Dict[str, Any] = {}
        self.log(ProvenanceEvent(stage=name, message=f"{message} started", payload=dict(payload)))
        started = time.perf_counter()
        try:
            yield extra
        except Exception as exc:
            elapsed = time.perf_counter() - started
            self.stage_seconds[name] = self.stage_seconds.get(name, 0.0) + elapsed
            self.log(
                ProvenanceEvent(
                    stage="error",
                    message=f"{message} failed: {exc}",
                    payload={"stage": name, "elapsed_seconds": elapsed, "error_type": type(exc).__name__},
                )
            )
            raise
        elapsed = time.perf_counter() - started
        self.stage_seconds[name] = self.stage_seconds.get(name, 0.0) + elapsed
        self.log(
            ProvenanceEvent(
                stage=name,
                message=f"{message} finished",
                payload={**payload, **extra, "elapsed_seconds": elapsed},
            )
        )


__all__ = ["ProvenanceEvent", "ProvenanceLogger"]
