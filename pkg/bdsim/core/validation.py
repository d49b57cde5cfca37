"""Validation framework for experiment inputs, grids, and output locations."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml

from bdsim.core.errors import ConfigurationError


class ValidationFailure(ConfigurationError):
    """Raised when validation fails; maps to the configuration exit code."""

    def __init__(self, message: str, *, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = errors or []


@dataclass
class ValidationResult:
    """Result of a validation check."""

    valid: bool
    errors: List[str]
    warnings: List[str]
    data: Any = None

    @property
    def has_warnings(self) -> bool:
        return len(self.warnings) > 0

    def raise_if_invalid(self) -> None:
        """Raise ValidationFailure if validation failed."""
        if not self.valid:
            message = "; ".join(self.errors) if self.errors else "Validation failed"
            raise ValidationFailure(message, errors=list(self.errors))


class ValidationFramework:
    """Central validation helpers; invalid input raises ``ValidationFailure``, warnings are only logged."""

    def __init__(self, *, log_level: str = "INFO"):
        self.logger = logging.getLogger("bdsim.validation")
        self.logger.setLevel(getattr(logging, log_level.upper()))

    def _finish(self, result: ValidationResult, label: str) -> ValidationResult:
        if not result.valid:
            self.logger.error("%s validation failed: %s", label, result.errors)
        elif result.has_warnings:
            self.logger.warning("%s validation warnings: %s", label, result.warnings)
        result.raise_if_invalid()
        return result

    # ============== Files and directories ==============

    def validate_output_dir(self, path: Path | str, *, create: bool = True) -> ValidationResult:
        """Validate that ``path`` is (or can become) a writable directory."""
        errors: List[str] = []
        warnings: List[str] = []
        path_obj = Path(path).expanduser().resolve()

        if path_obj.exists() and not path_obj.is_dir():
            errors.append(f"Output path is not a directory: {path_obj}")
        elif not path_obj.exists():
            if create:
                try:
                    path_obj.mkdir(parents=True, exist_ok=True)
                except OSError as exc:
                    errors.append(f"Cannot create output directory {path_obj}: {exc}")
            else:
                errors.append(f"Output directory does not exist: {path_obj}")
        if not errors and not os.access(path_obj, os.W_OK):
            errors.append(f"No write permission for output directory: {path_obj}")
        if not errors and any(path_obj.iterdir()):
            warnings.append(f"Output directory is not empty; files will be overwritten: {path_obj}")

        result = ValidationResult(valid=not errors, errors=errors, warnings=warnings, data=path_obj if not errors else None)
        return self._finish(result, "Output directory")

    def validate_config_file(self, path: Path | str) -> ValidationResult:
        """Load a JSON or YAML mapping from disk.

        JSON is a subset of YAML, so both go through ``yaml.safe_load``.
        """
        errors: List[str] = []
        warnings: List[str] = []
        data: Dict[str, Any] | None = None
        path_obj = Path(path).expanduser().resolve()

        if not path_obj.is_file():
            errors.append(f"Config file does not exist: {path_obj}")
        else:
            try:
                content = path_obj.read_text(encoding="utf-8")
                loaded = yaml.safe_load(content) if content.strip() else None
                if loaded is None:
                    warnings.append(f"Config file is empty: {path_obj}")
                    data = {}
                elif not isinstance(loaded, dict):
                    errors.append(f"Config file must contain a mapping, got {type(loaded).__name__}: {path_obj}")
                else:
                    data = loaded
            except yaml.YAMLError as exc:
                errors.append(f"Invalid JSON/YAML in {path_obj}: {exc}")

        result = ValidationResult(valid=not errors, errors=errors, warnings=warnings, data=data)
        return self._finish(result, "Config file")

    # ============== Values ==============

    def validate_grid(
        self,
        name: str,
        values: Sequence[float],
        *,
        increasing: bool = True,
        minimum: float | None = None,
        strict_minimum: bool = False,
    ) -> ValidationResult:
        """Validate a parameter grid: non-empty, finite, optionally increasing and bounded below."""
        errors: List[str] = []
        grid = [float(value) for value in values]

        if not grid:
            errors.append(f"{name} must not be empty")
        if any(not math.isfinite(value) for value in grid):
            errors.append(f"{name} contains non-finite values: {grid}")
        if increasing and any(b <= a for a, b in zip(grid, grid[1:])):
            errors.append(f"{name} must be strictly increasing: {grid}")
        if minimum is not None:
            below = [value for value in grid if value < minimum or (strict_minimum and value == minimum)]
            if below:
                relation = ">" if strict_minimum else ">="
                errors.append(f"{name} values must be {relation} {minimum}: {below}")

        result = ValidationResult(valid=not errors, errors=errors, warnings=[], data=grid if not errors else None)
        return self._finish(result, "Grid")

    def validate_points(self, name: str, points: Sequence[Any], *, count: int, dimension: int) -> ValidationResult:
        """Validate an initial condition: ``count`` finite points of length ``dimension``."""
        errors: List[str] = []
        rows: List[List[float]] = []
        for point in points:
            coords = list(point) if isinstance(point, (list, tuple)) else [point]
            rows.append([float(value) for value in coords])

        if not rows:
            errors.append(f"{name} must contain at least one point")
        elif len(rows) != count:
            errors.append(f"{name} has {len(rows)} points, expected {count}")
        if any(len(row) != dimension for row in rows):
            errors.append(f"{name} points must all have dimension {dimension}")
        if any(not math.isfinite(value) for row in rows for value in row):
            errors.append(f"{name} contains non-finite coordinates")

        result = ValidationResult(valid=not errors, errors=errors, warnings=[], data=rows if not errors else None)
        return self._finish(result, "Initial condition")


# ============== Global Instance ==============

validation = ValidationFramework()


__all__ = [
    "ValidationFailure",
    "ValidationFramework",
    "ValidationResult",
    "validation",
]
