"""Columnar binary persistence for long trajectories, plus CSV export.

File layout (little-endian throughout):

    bytes 0..7    magic b"PTCOLS01"
    bytes 8..11   uint32 length L of the JSON header
    bytes 12..    UTF-8 JSON header, L bytes
    then          one float64 array per column, column-major, rows each

The JSON header carries ``columns`` (names, in storage order), ``rows``,
``sample_rate_hz``, ``t0`` and a free-form ``meta`` object (seeds, resolved
settings).  The time axis is implicit: t_k = t0 + k / sample_rate_hz.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"PTCOLS01"


@dataclass
class ColumnFile:
    columns: tuple
    rows: int
    sample_rate: float
    t0: float
    meta: dict
    data: dict

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.rows) / self.sample_rate


def write_columns(path, names, arrays, sample_rate: float, *, t0: float = 0.0,
                  meta: dict | None = None) -> None:
    """Write named float64 columns of equal length."""
    names = tuple(names)
    arrays = [np.ascontiguousarray(a, dtype="<f8") for a in arrays]
    if len(names) != len(arrays):
        raise ValueError("one name per column required")
    rows = arrays[0].size
    if any(a.ndim != 1 or a.size != rows for a in arrays):
        raise ValueError("columns must be 1D and of equal length")
    header = {
        "columns": list(names),
        "rows": rows,
        "sample_rate_hz": float(sample_rate),
        "t0": float(t0),
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(a.tobytes())


def read_columns(path) -> ColumnFile:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a columnar trajectory file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        rows = int(header["rows"])
        data = {}
        for name in header["columns"]:
            buf = fh.read(8 * rows)
            if len(buf) != 8 * rows:
                raise ValueError(f"{path}: truncated column {name!r}")
            data[name] = np.frombuffer(buf, dtype="<f8").copy()
    return ColumnFile(
        columns=tuple(header["columns"]),
        rows=rows,
        sample_rate=float(header["sample_rate_hz"]),
        t0=float(header["t0"]),
        meta=header.get("meta", {}),
        data=data,
    )


def write_trajectory(path, trajectory, meta: dict | None = None) -> None:
    """Persist a :class:`paratrap.dynamics.Trajectory` (t column implicit)."""
    combined = dict(trajectory.meta)
    if meta:
        combined.update(meta)
    write_columns(path, trajectory.columns,
                  [trajectory.column(name) for name in trajectory.columns],
                  trajectory.sample_rate, t0=float(trajectory.t[0]), meta=combined)


def trajectory_to_csv(path, trajectory, max_rows: int | None = None) -> None:
    """Plain CSV export (t plus named columns) for small runs."""
    n = trajectory.t.size if max_rows is None else min(max_rows, trajectory.t.size)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(trajectory.columns) + "\n")
        for i in range(n):
            row = ",".join(repr(float(v)) for v in trajectory.data[i])
            fh.write(f"{float(trajectory.t[i])!r},{row}\n")


def write_matrix_csv(path, header: list, rows) -> None:
    """Small-table CSV writer with deterministic float formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                repr(float(v)) if isinstance(v, (int, float, np.floating)) else str(v)
                for v in row) + "\n")
