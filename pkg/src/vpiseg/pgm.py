"""Binary PGM (P5) image I/O and atomic file writing.

Grayscale images travel as 8-bit PGM with maxval 255 (pixel value v maps to
v/255); probability maps as 16-bit PGM with maxval 65535, big-endian sample
order per the netpbm convention.  Header comments and arbitrary whitespace
are accepted.  All writes in this package go through ``atomic_write_bytes``:
content lands in a temp file that is renamed into place, so a failure never
leaves a partial output file.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

_WS = b" \t\r\n\x0b\x0c"


def atomic_write_bytes(path: str, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _next_token(blob: bytes, pos: int, path: str) -> tuple[bytes, int]:
    n = len(blob)
    while pos < n:
        ch = blob[pos:pos + 1]
        if ch in _WS:
            pos += 1
        elif ch == b"#":
            while pos < n and blob[pos:pos + 1] not in b"\r\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise ValueError(f"{path}: truncated PGM header")
    start = pos
    while pos < n and blob[pos:pos + 1] not in _WS and blob[pos:pos + 1] != b"#":
        pos += 1
    return blob[start:pos], pos


def _read_raw(path: str) -> tuple[np.ndarray, int]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (expected magic P5, got {blob[:2]!r})")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(blob, pos, path)
        try:
            fields.append(int(tok))
        except ValueError:
            raise ValueError(f"{path}: malformed PGM {name} field {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError(f"{path}: invalid PGM dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ValueError(f"{path}: invalid PGM maxval {maxval}")
    pos += 1  # single whitespace byte separates the header from the payload
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    payload = blob[pos:pos + need]
    if len(payload) != need:
        raise ValueError(f"{path}: truncated PGM payload "
                         f"(expected {need} bytes, got {len(payload)})")
    pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return pixels, maxval


def read_pgm(path: str) -> np.ndarray:
    """Read an 8-bit P5 PGM into a float64 image in [0, 1]."""
    pixels, maxval = _read_raw(path)
    if maxval != 255:
        raise ValueError(f"{path}: expected 8-bit PGM with maxval 255, got {maxval}")
    return pixels.astype(np.float64) / 255.0


def read_pgm16(path: str) -> np.ndarray:
    """Read a 16-bit P5 PGM (maxval 65535) into a float64 image in [0, 1]."""
    pixels, maxval = _read_raw(path)
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM with maxval 65535, got {maxval}")
    return pixels.astype(np.float64) / 65535.0


def write_pgm(image: np.ndarray, path: str):
    """Write a [0, 1] float image as an 8-bit P5 PGM (values rounded to v*255)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"write_pgm: expected a 2-D image, got shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("write_pgm: pixel values must lie in [0, 1]")
    q = np.rint(img * 255.0).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + q.tobytes())


def write_pgm16(image: np.ndarray, path: str):
    """Write a [0, 1] float image as a 16-bit P5 PGM (values rounded to v*65535)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"write_pgm16: expected a 2-D image, got shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("write_pgm16: pixel values must lie in [0, 1]")
    q = np.rint(img * 65535.0).astype(">u2")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii")
    atomic_write_bytes(path, header + q.tobytes())
