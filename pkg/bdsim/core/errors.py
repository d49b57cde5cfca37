"""Exception hierarchy shared by the simulator, estimators, and CLI.

Each class carries the process exit code the CLI maps it to, so callers only
need to catch `BdsimError` to report failures consistently.
"""

from __future__ import annotations

from typing import Any, Dict


class BdsimError(Exception):
    """Base class for every error raised by bdsim."""

    exit_code: int = 1
    kind: str = "error"

    def __init__(self, message: str, *, details: Dict[str, Any] | None = None):
        super().__init__(message)
        self.details = dict(details or {})


class ConfigurationError(BdsimError, ValueError):
    """Invalid or inconsistent experiment configuration."""

    exit_code = 2
    kind = "config"


class ParameterDomainError(ConfigurationError):
    """A numeric parameter lies outside its admissible domain (dt, rate, tol, ...)."""

    kind = "parameter_domain"


class UnsupportedConfigurationError(ConfigurationError):
    """The requested feature is not available for this dimension or rule."""

    kind = "unsupported"


class PreconditionError(BdsimError):
    """A run-time precondition of an experiment does not hold."""

    exit_code = 3
    kind = "precondition"


class CriticalityError(PreconditionError):
    """Drift too close to the estimated critical speed to classify the regime."""

    kind = "criticality"


class ResourceCapError(BdsimError):
    """A population or work cap was exceeded."""

    exit_code = 4
    kind = "resource_cap"


def require_positive(name: str, value: float) -> float:
    """Return ``value`` as float or raise `ParameterDomainError` when it is not > 0."""
    number = float(value)
    if not number > 0.0:
        raise ParameterDomainError(f"{name} must be positive (got {value!r})", details={name: value})
    return number


__all__ = [
    "BdsimError",
    "ConfigurationError",
    "CriticalityError",
    "ParameterDomainError",
    "PreconditionError",
    "ResourceCapError",
    "UnsupportedConfigurationError",
    "require_positive",
]
