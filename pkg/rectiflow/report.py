"""Run reports and plot-ready CSV files.

report.json is written with sorted keys and shortest round-trip float text, so repeated runs on
the same input produce byte-identical files. CSV values use 17 significant digits.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

from . import __version__

REPORT_FILE = "report.json"
TRAJECTORY_FILE = "trajectory.csv"
GRID_FORWARD_FILE = "grid_forward.csv"
GRID_INVERSE_FILE = "grid_inverse.csv"
RESIDUALS_FILE = "residuals.csv"


def to_jsonable(value: Any) -> Any:
    """numpy types to plain Python; non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


@dataclass
class RunReport:
    command: List[str]
    problem: str
    results: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = 0
    wall_time: Optional[float] = None
    version: str = __version__

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "command": self.command,
            "problem": self.problem,
            "results": self.results,
            "exit_code": self.exit_code,
            "version": self.version,
        }
        if self.wall_time is not None:
            out["wall_time"] = self.wall_time
        return to_jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / REPORT_FILE
        path.write_text(self.to_json())
        return path


def format_float(value: float) -> str:
    return "%.17g" % value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Rows of numbers (and the odd string flag) with ``%.17g`` floats."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    return path


def space_header(prefix: str, n: int) -> List[str]:
    return [f"{prefix}{i + 1}" for i in range(n)]


def render_summary(report: RunReport, rows: Sequence[Sequence[Any]],
                   console: Optional[Console] = None) -> None:
    """Key results as a table on stderr."""
    console = console or Console(stderr=True)
    status = {0: "ok", 1: "hypothesis failure", 2: "numerical failure", 3: "input error"}
    table = Table(title=f"rectiflow {' '.join(report.command)}: {report.problem}")
    table.add_column("quantity", style="cyan")
    table.add_column("value", justify="right")
    for name, value in rows:
        if isinstance(value, float):
            value = f"{value:.6g}"
        table.add_row(str(name), str(value))
    table.add_row("exit", f"{report.exit_code} ({status.get(report.exit_code, '?')})")
    console.print(table)
