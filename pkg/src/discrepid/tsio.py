"""CSV and JSON emission/ingestion.

CSVs carry a mandatory header, LF line endings, and floats printed with 17
significant digits so every value round-trips bit-exactly.  Time series use
columns ``t, x1..xn[, u1..ur]``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CsvFormatError, DataError
from .numerics import TimeSeries


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_table_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """Write named columns of equal length as CSV."""
    columns = [np.asarray(c) for c in columns]
    if len(columns) != len(header):
        raise DataError("header and column counts differ")
    m = columns[0].shape[0]
    if any(c.shape[0] != m for c in columns):
        raise DataError("columns have unequal lengths")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(m):
            fh.write(",".join(_fmt(c[i]) for c in columns) + "\n")


def read_table_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a CSV with header; cell parse failures name the row and column."""
    path = Path(path)
    with open(path, "r", newline=None) as fh:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    lines = [ln for ln in lines if ln != ""]
    if not lines:
        raise DataError(f"{path}: empty CSV")
    header = lines[0].split(",")
    n_cols = len(header)
    data = np.empty((len(lines) - 1, n_cols))
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != n_cols:
            raise CsvFormatError(i, len(cells), f"{path}: row {i} has {len(cells)} cells, expected {n_cols}")
        for j, cell in enumerate(cells, start=1):
            try:
                data[i - 2, j - 1] = float(cell)
            except ValueError:
                raise CsvFormatError(
                    i, j, f"{path}: non-numeric cell {cell!r} at row {i}, column {j}"
                ) from None
    return header, data


def write_timeseries_csv(path, ts: TimeSeries) -> None:
    header = ["t"] + [f"x{i + 1}" for i in range(ts.state_dim)]
    columns = [ts.t] + [ts.states[:, i] for i in range(ts.state_dim)]
    if ts.controls is not None:
        header += [f"u{i + 1}" for i in range(ts.control_dim)]
        columns += [ts.controls[:, i] for i in range(ts.control_dim)]
    write_table_csv(path, header, columns)


def read_timeseries_csv(path) -> TimeSeries:
    """Re-ingest a time series written by :func:`write_timeseries_csv`."""
    header, data = read_table_csv(path)
    if header[0] != "t":
        raise DataError(f"{path}: first column must be 't', got '{header[0]}'")
    state_cols = [j for j, name in enumerate(header) if name.startswith("x")]
    control_cols = [j for j, name in enumerate(header) if name.startswith("u")]
    if not state_cols:
        raise DataError(f"{path}: no state columns (x1, x2, ...) found")
    if data.shape[0] < 2:
        raise DataError(f"{path}: need at least 2 samples")
    t = data[:, 0]
    dt = t[1] - t[0]
    if dt <= 0:
        raise DataError(f"{path}: time column is not increasing")
    if not np.allclose(np.diff(t), dt, rtol=0.0, atol=1e-9 * max(1.0, abs(dt))):
        raise DataError(f"{path}: time column is not uniformly sampled")
    states = data[:, state_cols]
    controls = data[:, control_cols] if control_cols else None
    return TimeSeries(float(t[0]), float(dt), states, controls)


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r") as fh:
        return json.load(fh)
