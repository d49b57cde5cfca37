"""Parsing helpers for list-valued CLI flags and config fields."""

from __future__ import annotations

import re
from collections.abc import Sequence
from typing import List

from bdsim.core.errors import ConfigurationError

DEFAULT_DELIMITERS = r"[;,]"


def split_fields(value: str | Sequence[str] | None, *, delimiters: str = DEFAULT_DELIMITERS) -> List[str]:
    """Split a CSV-like field into trimmed tokens.

    Works for strings (splitting on the provided delimiters) or sequences (recursively splits
    each entry). Returns an empty list when the input is falsy.
    """

    if value is None or (isinstance(value, (str, bytes)) and not value):
        return []
    if isinstance(value, Sequence) and not isinstance(value, (str, bytes)):
        tokens: List[str] = []
        for item in value:
            tokens.extend(split_fields(item, delimiters=delimiters))
        return tokens
    text = str(value)
    raw_tokens = re.split(delimiters, text)
    return [token.strip() for token in raw_tokens if token.strip()]


def parse_float_grid(value: str | Sequence[str | float] | None, *, name: str = "grid") -> List[float]:
    """``"0.1, 0.2;0.5"`` or ``[0.1, "0.2"]`` -> ``[0.1, 0.2, 0.5]``."""
    try:
        return [float(token) for token in split_fields([str(item) for item in value] if _is_seq(value) else value)]
    except ValueError as exc:
        raise ConfigurationError(f"{name} must be a list of numbers (got {value!r})") from exc


def parse_int_grid(value: str | Sequence[str | int] | None, *, name: str = "grid") -> List[int]:
    numbers = parse_float_grid(value, name=name)
    if any(number != int(number) for number in numbers):
        raise ConfigurationError(f"{name} must contain integers (got {numbers})")
    return [int(number) for number in numbers]


def parse_tagged(value: str, *, name: str = "value") -> tuple[str, float | None]:
    """``"exponential:1.5"`` -> ``("exponential", 1.5)``; ``"constant_one"`` -> ``("constant_one", None)``."""
    text = str(value).strip()
    if not text:
        raise ConfigurationError(f"{name} must not be empty")
    tag, _, argument = text.partition(":")
    tag = tag.strip().lower().replace("-", "_")
    if not argument.strip():
        return tag, None
    try:
        return tag, float(argument)
    except ValueError as exc:
        raise ConfigurationError(f"{name} argument must be numeric (got {value!r})") from exc


def _is_seq(value: object) -> bool:
    return isinstance(value, Sequence) and not isinstance(value, (str, bytes))
