"""File formats: binary state snapshots and the CSV scalar trace.

Snapshot layout: a 64-byte header (magic "DNLS0001", dimension, points per
axis, half-width per axis, simulation time) followed by the complex128
field, little-endian, row-major.  The trace is plain CSV with a fixed
column set, every float printed with 17 significant digits so parsing the
file back reproduces the records bit for bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .diagnostics import TRACE_COLUMNS, DiagnosticsRecord
from .fields import WaveFunction
from .grid import Grid, make_grid

__all__ = [
    "SNAPSHOT_MAGIC",
    "SnapshotFormatError",
    "TraceFormatError",
    "write_snapshot",
    "read_snapshot",
    "write_trace",
    "read_trace",
]

SNAPSHOT_MAGIC = b"DNLS0001"
# magic, dim, n[3], L[3], time, padded to 64 bytes
_HEADER = struct.Struct("<8sI3I3dd8x")
assert _HEADER.size == 64


class SnapshotFormatError(ValueError):
    pass


class TraceFormatError(ValueError):
    """Raised for malformed traces; lists what is missing or inconsistent."""

    def __init__(self, problems: list[str]) -> None:
        super().__init__("; ".join(problems))
        self.problems = problems


def write_snapshot(path: str | Path, state: WaveFunction, time: float) -> None:
    grid = state.grid
    n = list(grid.points) + [0] * (3 - grid.dim)
    hw = list(grid.half_width) + [0.0] * (3 - grid.dim)
    header = _HEADER.pack(SNAPSHOT_MAGIC, grid.dim, *n, *hw, time)
    data = np.ascontiguousarray(state.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path: str | Path) -> tuple[WaveFunction, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: file shorter than the 64-byte header")
    magic, dim, n0, n1, n2, l0, l1, l2, time = _HEADER.unpack(raw[: _HEADER.size])
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if dim not in (1, 2, 3):
        raise SnapshotFormatError(f"{path}: dimension {dim} out of range")
    points = (n0, n1, n2)[:dim]
    widths = (l0, l1, l2)[:dim]
    expected = int(np.prod(points)) * 16
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise SnapshotFormatError(
            f"{path}: payload has {len(body)} bytes, expected {expected}"
        )
    grid = make_grid(points, widths)
    values = np.frombuffer(body, dtype="<c16").reshape(points).astype(np.complex128)
    return WaveFunction(grid, values), time


def _format_value(x: float) -> str:
    return format(x, ".17g")


def write_trace(path: str | Path, records: list[DiagnosticsRecord]) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for rec in records:
        lines.append(",".join(_format_value(getattr(rec, c)) for c in TRACE_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace(path: str | Path) -> list[DiagnosticsRecord]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError([f"{path}: empty trace file"])
    header = lines[0].split(",")
    problems = []
    missing = [c for c in TRACE_COLUMNS if c not in header]
    if missing:
        problems.append(f"{path}: missing columns: {', '.join(missing)}")
    extra = [c for c in header if c not in TRACE_COLUMNS]
    if extra:
        problems.append(f"{path}: unknown columns: {', '.join(extra)}")
    if not problems and header != list(TRACE_COLUMNS):
        problems.append(f"{path}: columns out of order; expected {','.join(TRACE_COLUMNS)}")
    if problems:
        raise TraceFormatError(problems)
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(TRACE_COLUMNS):
            raise TraceFormatError(
                [f"{path}:{lineno}: row has {len(parts)} fields, expected {len(TRACE_COLUMNS)}"]
            )
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise TraceFormatError([f"{path}:{lineno}: {exc}"]) from exc
        records.append(DiagnosticsRecord(**dict(zip(TRACE_COLUMNS, values))))
    return records
