"""
Monte Carlo toolkit for Brunet-Derrida branching-selection particle systems.

The package is split into the exact sampling kernel and particle dynamics
(`bdsim.simulation`), replicate-level estimators (`bdsim.estimators`), and the
experiment pipeline behind the `bdsim` command (`bdsim.pipeline`, `bdsim.cli`).
"""

from importlib import metadata


def get_version() -> str:
    """Return the installed project version."""
    try:
        return metadata.version("bdsim")
    except metadata.PackageNotFoundError:
        return "0.0.0"


__all__ = ["get_version"]
