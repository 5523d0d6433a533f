"""8-bit binary PGM (``P5``) reading and writing."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from aeroground.spatial import Raster

_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


class PGMError(ValueError):
    pass


def decode(data: bytes) -> Raster:
    tokens = []
    pos = 0
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PGMError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic, width, height, maxval = tokens
    if magic != b"P5":
        raise PGMError(f"not a binary PGM (magic {magic!r})")
    try:
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError:
        raise PGMError("malformed PGM header") from None
    if width <= 0 or height <= 0:
        raise PGMError(f"invalid PGM size {width}x{height}")
    if not 0 < maxval < 256:
        raise PGMError(f"only 8-bit PGM is supported (maxval {maxval})")
    # exactly one whitespace byte separates the header from the samples
    pos += 1
    body = data[pos : pos + width * height]
    if len(body) != width * height:
        raise PGMError(f"PGM body has {len(body)} bytes, expected {width * height}")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    return Raster(arr / float(maxval))


def encode(image) -> bytes:
    raster = image if isinstance(image, Raster) else Raster(image)
    return b"P5\n%d %d\n255\n" % (raster.width, raster.height) + raster.to_bytes()


def read(path) -> Raster:
    return decode(Path(path).read_bytes())


def write(path, image) -> None:
    Path(path).write_bytes(encode(image))
