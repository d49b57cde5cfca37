"""Run bootstrap and command dispatch for the bdsim CLI."""

from __future__ import annotations

from .bootstrap import bootstrap_run
from .context import RunContext, RunPaths
from .runtime import RunArtifacts, execute

__all__ = [
    "RunArtifacts",
    "RunContext",
    "RunPaths",
    "bootstrap_run",
    "execute",
]
