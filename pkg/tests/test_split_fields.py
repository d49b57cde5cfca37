import pytest

from bdsim.core.errors import ConfigurationError
from bdsim.utils.split_fields import parse_float_grid, parse_int_grid, parse_tagged, split_fields


def test_split_fields_handles_semicolons() -> None:
    assert split_fields("0.1;0.2") == ["0.1", "0.2"]


def test_split_fields_handles_comma_sequences() -> None:
    assert split_fields(["0.1,0.2", "0.3"]) == ["0.1", "0.2", "0.3"]


def test_split_fields_handles_empty_values() -> None:
    assert split_fields(None) == []
    assert split_fields("") == []
    assert split_fields([None, ""]) == []


def test_parse_float_grid() -> None:
    assert parse_float_grid("0.1, 0.2;0.5") == [0.1, 0.2, 0.5]
    assert parse_float_grid([1, "2.5"]) == [1.0, 2.5]
    with pytest.raises(ConfigurationError):
        parse_float_grid("0.1,abc", name="mu_grid")


def test_parse_int_grid() -> None:
    assert parse_int_grid("2,4,8") == [2, 4, 8]
    with pytest.raises(ConfigurationError):
        parse_int_grid("2,4.5")


def test_parse_tagged() -> None:
    assert parse_tagged("exponential:1.5") == ("exponential", 1.5)
    assert parse_tagged("Constant-One") == ("constant_one", None)
    with pytest.raises(ConfigurationError):
        parse_tagged("")
    with pytest.raises(ConfigurationError):
        parse_tagged("fixed:soon")
