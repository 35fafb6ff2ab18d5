"""Binary parameter checkpoints.

Layout, all integers unsigned 32-bit little-endian::

    b"SEMF"                      magic, 4 bytes
    version                      u32 (currently 1)
    count                        u32, number of arrays
    count times:
        name_len                 u32
        name                     name_len bytes, UTF-8
        rank                     u32
        dims                     rank x u32
        values                   prod(dims) x float64 little-endian, row-major

Arrays are written in the order given; readers get an ordered dict back.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SEMF"
VERSION = 1

_U32 = struct.Struct("<I")


def save_arrays(path, arrays: dict) -> None:
    chunks = [MAGIC, _U32.pack(VERSION), _U32.pack(len(arrays))]
    for name, value in arrays.items():
        value = np.ascontiguousarray(value, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(_U32.pack(len(raw)))
        chunks.append(raw)
        chunks.append(_U32.pack(value.ndim))
        chunks.extend(_U32.pack(d) for d in value.shape)
        chunks.append(value.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_arrays(path) -> dict:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes {buf[:4]!r}, expected {MAGIC!r}")
    pos = 4

    def u32():
        nonlocal pos
        if pos + 4 > len(buf):
            raise FormatError(f"{path}: truncated checkpoint")
        (v,) = _U32.unpack_from(buf, pos)
        pos += 4
        return v

    version = u32()
    if version != VERSION:
        raise FormatError(f"{path}: checkpoint version {version} unsupported (expected {VERSION})")
    out = {}
    for _ in range(u32()):
        n = u32()
        name = buf[pos : pos + n].decode("utf-8")
        pos += n
        dims = tuple(u32() for _ in range(u32()))
        nbytes = 8 * int(np.prod(dims, dtype=np.int64))
        if pos + nbytes > len(buf):
            raise FormatError(f"{path}: truncated data for {name!r}")
        out[name] = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=pos).reshape(dims).astype(np.float64)
        pos += nbytes
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    return out
