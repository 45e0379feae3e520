"""SQGF binary field format: magic 'SQGF', u32 version=1, u32 n, then n*n
float64 little-endian physical values, row-major with x1 fastest."""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError
from .spectral import GridSpec, PhysicalField

MAGIC = b"SQGF"
VERSION = 1


def write_field(path, field: PhysicalField) -> None:
    n = field.grid.n
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, n))
        # x1 is the fastest-varying index; values are indexed [i1, i2]
        fh.write(np.asarray(field.values, dtype="<f8").tobytes(order="F"))


def read_field(path) -> PhysicalField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        version, n = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise DataError(f"{path}: unsupported SQGF version {version}")
        raw = fh.read(8 * n * n)
        if len(raw) != 8 * n * n:
            raise DataError(f"{path}: truncated payload")
        values = np.frombuffer(raw, dtype="<f8").reshape((n, n), order="F")
    return PhysicalField(GridSpec(n), np.ascontiguousarray(values))
