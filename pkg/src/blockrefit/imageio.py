"""Binary PGM/PPM images and the lossless float64 ``RFL1`` sidecar.

Sidecar layout (little-endian)::

    bytes 0-3    magic b"RFL1"
    bytes 4-15   uint32 height, width, channels
    bytes 16-    float64 values, row-major, channel fastest
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = ["write_pnm", "read_pnm", "write_raw", "read_raw", "to_uint8"]

RAW_MAGIC = b"RFL1"
_HEADER = struct.Struct("<4s3I")


def to_uint8(x):
    """Round and clamp to ``[0, 255]``."""
    return np.clip(np.rint(np.asarray(x, dtype=float)), 0, 255).astype(np.uint8)


def write_pnm(path, x):
    """Write a gray ``(H, W)`` image as P5 or an ``(H, W, 3)`` image as P6."""
    x = np.asarray(x)
    if x.ndim == 2:
        magic = b"P5"
    elif x.ndim == 3 and x.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write shape {x.shape} as PGM/PPM")
    h, w = x.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n255\n" % (magic, w, h))
        fh.write(to_uint8(x).tobytes())


def _tokens(data):
    """Yield header tokens and the offset after the last one, skipping comments."""
    pos = 0
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < n and not data[pos : pos + 1].isspace():
                pos += 1
            yield data[start:pos], pos


def read_pnm(path):
    """Read a binary P5/P6 file with maxval <= 255 into a float array."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        w, _ = next(toks)
        h, _ = next(toks)
        maxval, end = next(toks)
    except StopIteration:
        raise ValueError(f"{path}: truncated PNM header") from None
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported PNM magic {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: only 8-bit PNM is supported")
    channels = 1 if magic == b"P5" else 3
    count = h * w * channels
    payload = data[end + 1 : end + 1 + count]
    if len(payload) != count:
        raise ValueError(f"{path}: truncated PNM payload")
    img = np.frombuffer(payload, dtype=np.uint8).astype(float)
    return img.reshape((h, w) if channels == 1 else (h, w, 3))


def write_raw(path, x):
    x = np.asarray(x, dtype="<f8")
    if x.ndim == 2:
        h, w, c = *x.shape, 1
    elif x.ndim == 3:
        h, w, c = x.shape
    else:
        raise ValueError(f"cannot write shape {x.shape} as a raw sidecar")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RAW_MAGIC, h, w, c))
        fh.write(np.ascontiguousarray(x).tobytes())


def read_raw(path):
    """Inverse of :func:`write_raw`; single-channel data comes back as ``(H, W)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated raw header")
    magic, h, w, c = _HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    payload = data[_HEADER.size :]
    if len(payload) != 8 * h * w * c:
        raise ValueError(f"{path}: payload size does not match header")
    x = np.frombuffer(payload, dtype="<f8").astype(float)
    return x.reshape((h, w) if c == 1 else (h, w, c))
