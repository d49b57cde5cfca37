"""Test configuration hooks: repo root on sys.path and no ambient output directory."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from bdsim.pipeline.bootstrap import ENV_OUTPUT_DIR  # noqa: E402


@pytest.fixture(autouse=True)
def _isolated_output_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """A BDSIM_OUTPUT_DIR from the developer's shell must not redirect test runs."""
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
