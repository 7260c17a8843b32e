"""CSF1 binary signal files.

Layout: 16-byte header (``b"CSF1"``, little-endian u32 length, u8 complex
flag, 7 reserved zero bytes) followed by little-endian float64 samples,
interleaved re/im when the complex flag is set.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"CSF1"
_HEADER = struct.Struct("<4sIB7x")


def encode_signal(x) -> bytes:
    x = np.asarray(x)
    if x.ndim != 1:
        raise FormatError("only 1-D signals can be stored")
    is_complex = np.iscomplexobj(x)
    if is_complex:
        payload = np.column_stack([x.real, x.imag]).astype("<f8").tobytes()
    else:
        payload = x.astype("<f8").tobytes()
    return _HEADER.pack(MAGIC, x.size, int(is_complex)) + payload


def decode_signal(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise FormatError("file shorter than the CSF1 header")
    magic, n, flag = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if flag not in (0, 1):
        raise FormatError(f"complex flag must be 0 or 1, got {flag}")
    width = 2 if flag else 1
    body = blob[_HEADER.size :]
    if len(body) != 8 * width * n:
        raise FormatError(f"payload has {len(body)} bytes, header promises {8 * width * n}")
    data = np.frombuffer(body, dtype="<f8").astype(float)
    if flag:
        return data[0::2] + 1j * data[1::2]
    return data


def write_signal(path, x) -> None:
    Path(path).write_bytes(encode_signal(x))


def read_signal(path) -> np.ndarray:
    return decode_signal(Path(path).read_bytes())
