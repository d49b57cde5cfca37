import math
from pathlib import Path

import numpy as np
import pytest

from bdsim.utils.tables import ResultTable, format_cell, read_csv, sha256_file


@pytest.mark.parametrize(
    "value,expected",
    [
        (None, ""),
        (True, "true"),
        (3, "3"),
        (0.1, "0.10000000000000001"),
        (2.0, "2"),
        (math.nan, "nan"),
        (-math.inf, "-inf"),
        (np.float64(0.5), "0.5"),
        ("kill_left", "kill_left"),
    ],
)
def test_format_cell(value, expected) -> None:
    assert format_cell(value) == expected


def test_append_checks_width() -> None:
    table = ResultTable("t", ["a", "b"])
    table.append(1, 2)
    with pytest.raises(ValueError):
        table.append(1)
    assert table.as_dicts() == [{"a": 1, "b": 2}]


def test_csv_round_trip_and_checksum(tmp_path: Path) -> None:
    table = ResultTable("speed", ["n", "speed"], [[2, 0.5], [4, 1.0 / 3.0]])
    first = table.write_csv(tmp_path / "a" / "speed.csv")
    second = table.write_csv(tmp_path / "b" / "speed.csv")

    loaded = read_csv(first)
    assert loaded.name == "speed"
    assert loaded.column("speed") == ["0.5", "0.33333333333333331"]
    assert float(loaded.column("speed")[1]) == 1.0 / 3.0
    assert sha256_file(first) == sha256_file(second)
    assert first.read_text(encoding="utf-8").splitlines()[0] == "n,speed"
