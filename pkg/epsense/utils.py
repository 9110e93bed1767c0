"""
utils.py

Shared helpers for grids and for writing result tables as CSV or JSON.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path
from typing import Iterable, List, Optional, TextIO

import numpy as np

from epsense.sensing_types import SweepResult

FLOAT_FORMAT = ".17g"


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, FLOAT_FORMAT)


def with_points(grid: np.ndarray, points: Iterable[float], rtol: float = 1e-9) -> np.ndarray:
    """Insert exact `points` into a sorted grid, replacing near-duplicates."""
    values = np.asarray(grid, dtype=float)
    for point in points:
        close = np.isclose(values, point, rtol=rtol, atol=0.0)
        values = np.append(values[~close], point)
    return np.sort(values)


def _write_rows(result: SweepResult, handle: TextIO) -> None:
    for key, value in result.metadata.items():
        handle.write(f"# {key}: {value}\n")
    writer = csv.writer(handle, lineterminator="\n")
    names: List[str] = list(result.columns)
    writer.writerow(names)
    for row in range(result.n_rows):
        writer.writerow([format_float(result.columns[name][row]) for name in names])


def write_csv(result: SweepResult, path: Optional[Path] = None) -> None:
    """Metadata as `# key: value` lines, then the header, then the rows."""
    if path is None:
        _write_rows(result, sys.stdout)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        _write_rows(result, f)


def _json_safe(value: float):
    return value if math.isfinite(value) else format_float(value)


def result_to_json(result: SweepResult) -> str:
    document = {
        "parameter": result.parameter,
        "metadata": result.metadata,
        "columns": {
            name: [_json_safe(v) for v in values] for name, values in result.columns.items()
        },
    }
    return json.dumps(document, indent=2)


def write_text(text: str, path: Optional[Path] = None) -> None:
    if path is None:
        sys.stdout.write(text + "\n")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
