"""Trace CSV and CHTX1 snapshot persistence.

Snapshot layout (little-endian):

    5 bytes   magic b"CHTX1"
    u8        dim
    u64 x dim points per dimension
    f64       half_width
    f64 x N^dim values, row-major
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsTrace
from .model import Field, Grid

MAGIC = b"CHTX1"


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_trace(trace: DiagnosticsTrace, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(trace.columns)
            for row in trace.rows():
                w.writerow([_fmt(x) for x in row])
        meta = {
            "p_values": list(trace.p_values),
            "lyapunov_bound": None if math.isnan(trace.lyapunov_bound) else trace.lyapunov_bound,
            "blown_up_at": trace.blown_up_at,
        }
        path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=1))
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    return path


def _parse_p(col: str) -> float:
    return float(col[len("local_lp_p"):])


def read_trace(path) -> DiagnosticsTrace:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read trace {path}: {exc}") from exc
    header = rows[0]
    ps = [_parse_p(c) for c in header if c.startswith("local_lp_p")]
    trace = DiagnosticsTrace(tuple(ps))
    if trace.columns != header:
        raise ValueError(f"{path}: unexpected trace header {header}")
    for r in rows[1:]:
        trace.append_row([float(x) for x in r])
    meta_path = path.with_suffix(".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        lb = meta.get("lyapunov_bound")
        trace.lyapunov_bound = math.nan if lb is None else float(lb)
        trace.blown_up_at = meta.get("blown_up_at")
    return trace


def write_snapshot(f: Field, path) -> Path:
    path = Path(path)
    g = f.grid
    header = MAGIC + struct.pack("<B", g.dim) + struct.pack("<" + "Q" * g.dim, *g.shape)
    header += struct.pack("<d", g.half_width)
    try:
        with path.open("wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc
    return path


def read_snapshot(path) -> Field:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc
    if data[:5] != MAGIC:
        raise ValueError(f"{path}: bad magic {data[:5]!r}")
    dim = data[5]
    off = 6
    shape = struct.unpack_from("<" + "Q" * dim, data, off)
    off += 8 * dim
    (half_width,) = struct.unpack_from("<d", data, off)
    off += 8
    if len(set(shape)) != 1:
        raise ValueError(f"{path}: non-cubic grid {shape}")
    count = int(np.prod(shape))
    if len(data) - off != 8 * count:
        raise ValueError(f"{path}: expected {8 * count} value bytes, found {len(data) - off}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
    grid = Grid(dim, half_width, shape[0], point_cap=max(count, 1))
    return Field(grid, values.reshape(shape))
