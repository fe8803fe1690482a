"""Reader for the QCTW binary grid format.

Layout: magic bytes ``QCTW``, u32 version (= 1), u32 n_x, u32 n_p, then
x_min, dx, p_min, dp as little-endian float64, then n_x * n_p
little-endian float64 values, row-major in x.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


class FormatError(Exception):
    """Input file does not match the expected format."""


MAGIC = b"QCTW"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdddd")


@dataclass
class GridDump:
    values: np.ndarray
    x0: float
    dx: float
    p0: float
    dp: float

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_p(self) -> int:
        return self.values.shape[1]


def read_qctw(path: str) -> GridDump:
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
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return GridDump(values=values.reshape(n_x, n_p).copy(), x0=x0, dx=dx,
                    p0=p0, dp=dp)
