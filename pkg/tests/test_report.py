"""Tests for report.json and CSV writing."""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from rectiflow.report import (  # noqa: E402
    RunReport,
    format_float,
    space_header,
    to_jsonable,
    write_csv,
)


def test_to_jsonable_converts_numpy_and_non_finite():
    data = {"a": np.float64(0.1), "b": np.array([1, 2]), "c": float("inf"), "d": float("nan"),
            "e": (np.int64(3), np.bool_(True)), "f": -float("inf")}
    assert to_jsonable(data) == {"a": 0.1, "b": [1, 2], "c": "inf", "d": "nan",
                                 "e": [3, True], "f": "-inf"}


def test_report_json_is_sorted_and_round_trips_floats():
    report = RunReport(["rectify"], "demo", {"z": 0.1 + 0.2, "a": [1e-300, 2.5]}, exit_code=1)
    text = report.to_json()
    assert text.index('"command"') < text.index('"exit_code"') < text.index('"results"')
    parsed = json.loads(text)
    assert parsed["results"]["z"] == 0.1 + 0.2
    assert parsed["results"]["a"][0] == 1e-300
    assert "wall_time" not in parsed


def test_report_write_creates_directory(tmp_path):
    report = RunReport(["solve"], "demo", {}, wall_time=0.5)
    path = report.write(tmp_path / "nested" / "out")
    assert json.loads(path.read_text())["wall_time"] == 0.5


def test_csv_uses_seventeen_significant_digits(tmp_path):
    path = write_csv(tmp_path / "x.csv", ["t", "x1", "status"], [[0.1, np.float64(1 / 3), "ok"]])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,status"
    assert lines[1] == "0.10000000000000001,0.33333333333333331,ok"
    assert float(lines[1].split(",")[1]) == 1 / 3


def test_format_float_and_headers():
    assert format_float(2.0) == "2"
    assert space_header("x0_", 2) == ["x0_1", "x0_2"]
