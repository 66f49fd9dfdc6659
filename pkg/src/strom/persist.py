"""Bit-exact matrix storage.

File layout (fixed, independent of host endianness):

    bytes 0..7    magic ``STROMMAT``
    bytes 8..11   format version, unsigned 32-bit little-endian (currently 1)
    bytes 12..19  rows, unsigned 64-bit little-endian
    bytes 20..27  cols, unsigned 64-bit little-endian
    bytes 28..    rows*cols IEEE-754 binary64 values, little-endian,
                  column-major

A file therefore occupies exactly ``28 + 8*rows*cols`` bytes.  Round-trips
are bit-identical; headers are validated (including the implied file size)
before any payload is allocated.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"STROMMAT"
VERSION = 1
HEADER_SIZE = 28
_HEADER = struct.Struct("<8sIQQ")


class MatrixFileError(Exception):
    """Raised for malformed, truncated, or non-finite matrix files."""


def write_matrix(path, m: np.ndarray) -> None:
    """Write a 2-D float64 matrix; rejects empty or non-finite input."""
    m = np.asarray(m, dtype="<f8")
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.size == 0:
        raise MatrixFileError(f"refusing to write empty or non-2-D matrix of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MatrixFileError("refusing to write non-finite entries")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(np.asfortranarray(m).tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`; validates before allocating."""
    size = os.stat(path).st_size
    if size < HEADER_SIZE:
        raise MatrixFileError(f"{path}: file too short for a header ({size} bytes)")
    with open(path, "rb") as fh:
        magic, version, rows, cols = _HEADER.unpack(fh.read(HEADER_SIZE))
        if magic != MAGIC:
            raise MatrixFileError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise MatrixFileError(f"{path}: unsupported version {version}")
        if rows == 0 or cols == 0:
            raise MatrixFileError(f"{path}: degenerate shape {rows}x{cols}")
        expected = HEADER_SIZE + 8 * rows * cols
        if size != expected:
            raise MatrixFileError(
                f"{path}: payload truncated or padded ({size} bytes, expected {expected})"
            )
        data = np.fromfile(fh, dtype="<f8", count=rows * cols)
    if data.size != rows * cols:
        raise MatrixFileError(f"{path}: short read of payload")
    m = data.reshape((rows, cols), order="F")
    if not np.all(np.isfinite(m)):
        raise MatrixFileError(f"{path}: non-finite values in payload")
    return np.ascontiguousarray(m)
