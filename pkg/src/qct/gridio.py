"""Phase-space grid dumps.

Binary "QCTW" format (bit-exact round trip): magic bytes ``QCTW``,
format version u32 = 1, then n_x, n_p as u32, then x_min, dx, p_min, dp as
little-endian float64, then n_x * n_p little-endian float64 values,
row-major in x. A CSV export with header ``x,p,w`` is provided as a
text alternative.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError
from .qstate import WignerGrid

MAGIC = b"QCTW"
VERSION = 1
_HEADER = struct.Struct("<4sIII dddd".replace(" ", ""))


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temporary file and atomic rename; no partial files."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def grid_to_bytes(grid: WignerGrid) -> bytes:
    header = _HEADER.pack(
        MAGIC, VERSION, grid.n_x, grid.n_p, grid.x0, grid.dx, grid.p0, grid.dp
    )
    return header + np.ascontiguousarray(grid.values, dtype="<f8").tobytes()

def write_qctw(path: str, grid: WignerGrid) -> None:
    atomic_write_bytes(path, grid_to_bytes(grid))


def read_qctw(path: str) -> WignerGrid:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n_x, n_p, x0, dx, p0, dp = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * n_x * n_p
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n_x, n_p)
    return WignerGrid(values=values.copy(), x0=x0, dx=dx, p0=p0, dp=dp)


def format_float(v: float) -> str:
    """Shortest round-trip decimal form; reproducible across runs."""
    return repr(float(v))


def grid_to_csv(grid: WignerGrid) -> str:
    lines = ["x,p,w"]
    x = grid.x
    p = grid.p
    vals = grid.values
    for i in range(grid.n_x):
        xi = format_float(x[i])
        row = vals[i]
        for j in range(grid.n_p):
            lines.append(f"{xi},{format_float(p[j])},{format_float(row[j])}")
    lines.append("")
    return "\n".join(lines)


def write_grid_csv(path: str, grid: WignerGrid) -> None:
    atomic_write_text(path, grid_to_csv(grid))
