"""Framed binary messages exchanged by the drone and the ground robot.

A frame is ``u32 payload_length | u8 tag | payload`` (big-endian):

* ``0x01`` localization: two float64 (world x, world y, meters)
* ``0x02`` sensor image: u32 width, u32 height, ``width*height`` u8 samples
* ``0x03`` segmented image: same layout as ``0x02``, samples in {0, 255}
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from aeroground.spatial import Raster

HEADER = struct.Struct(">IB")
LOCALIZATION = struct.Struct(">dd")
IMAGE_HEADER = struct.Struct(">II")
MAX_PAYLOAD = 1 << 28


class WireFormatError(ValueError):
    """Malformed or truncated frame."""


class Tag(enum.IntEnum):
    LOCALIZATION = 0x01
    SENSOR_IMAGE = 0x02
    SEGMENTED_IMAGE = 0x03


@dataclass(frozen=True)
class WireMessage:
    tag: Tag
    payload: bytes

    def __post_init__(self):
        try:
            object.__setattr__(self, "tag", Tag(self.tag))
        except ValueError:
            raise WireFormatError(f"unknown message tag 0x{int(self.tag):02x}") from None
        object.__setattr__(self, "payload", bytes(self.payload))

    def encode(self) -> bytes:
        return HEADER.pack(len(self.payload), int(self.tag)) + self.payload

    @classmethod
    def decode(cls, frame: bytes) -> WireMessage:
        msg, used = cls.decode_prefix(frame)
        if used != len(frame):
            raise WireFormatError(f"{len(frame) - used} trailing bytes after frame")
        return msg

    @classmethod
    def decode_prefix(cls, buf: bytes) -> tuple[WireMessage, int]:
        """Decode one frame from the front of ``buf``; return it and its size."""
        if len(buf) < HEADER.size:
            raise WireFormatError("truncated frame header")
        length, tag = HEADER.unpack_from(buf)
        if length > MAX_PAYLOAD:
            raise WireFormatError(f"payload length {length} exceeds limit")
        end = HEADER.size + length
        if len(buf) < end:
            raise WireFormatError(f"truncated payload: need {length} bytes, have {len(buf) - HEADER.size}")
        msg = cls(tag, bytes(buf[HEADER.size : end]))
        msg.validate()
        return msg, end

    def validate(self) -> None:
        if self.tag is Tag.LOCALIZATION:
            if len(self.payload) != LOCALIZATION.size:
                raise WireFormatError(f"localization payload must be 16 bytes, got {len(self.payload)}")
            return
        if len(self.payload) < IMAGE_HEADER.size:
            raise WireFormatError("image payload missing width/height")
        w, h = IMAGE_HEADER.unpack_from(self.payload)
        if len(self.payload) != IMAGE_HEADER.size + w * h:
            raise WireFormatError(f"image payload size mismatch for {w}x{h}")
        if self.tag is Tag.SEGMENTED_IMAGE:
            body = np.frombuffer(self.payload, dtype=np.uint8, offset=IMAGE_HEADER.size)
            if np.any((body != 0) & (body != 255)):
                raise WireFormatError("segmented image samples must be 0 or 255")


def localization_message(x: float, y: float) -> WireMessage:
    return WireMessage(Tag.LOCALIZATION, LOCALIZATION.pack(x, y))


def image_message(image: Raster, tag: Tag = Tag.SENSOR_IMAGE) -> WireMessage:
    raster = image if isinstance(image, Raster) else Raster(image)
    body = raster.to_bytes()
    if tag is Tag.SEGMENTED_IMAGE:
        body = np.where(np.frombuffer(body, dtype=np.uint8) >= 128, 255, 0).astype(np.uint8).tobytes()
    msg = WireMessage(tag, IMAGE_HEADER.pack(raster.width, raster.height) + body)
    msg.validate()
    return msg


def parse_localization(msg: WireMessage) -> tuple[float, float]:
    if msg.tag is not Tag.LOCALIZATION:
        raise WireFormatError(f"expected localization, got {msg.tag.name}")
    return LOCALIZATION.unpack(msg.payload)


def parse_image(msg: WireMessage) -> Raster:
    if msg.tag is Tag.LOCALIZATION:
        raise WireFormatError("expected an image message, got LOCALIZATION")
    w, h = IMAGE_HEADER.unpack_from(msg.payload)
    return Raster.from_bytes(w, h, msg.payload[IMAGE_HEADER.size :])


def _read_exact(stream, n: int) -> bytes:
    chunks = []
    while n:
        chunk = stream.read(n)
        if not chunk:
            raise WireFormatError("stream closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(stream) -> WireMessage | None:
    """Blocking read of one frame from a binary stream; ``None`` at clean EOF."""
    head = stream.read(HEADER.size)
    if not head:
        return None
    if len(head) < HEADER.size:
        head += _read_exact(stream, HEADER.size - len(head))
    length, _ = HEADER.unpack(head)
    if length > MAX_PAYLOAD:
        raise WireFormatError(f"payload length {length} exceeds limit")
    return WireMessage.decode(head + _read_exact(stream, length))


def write_frame(stream, msg: WireMessage) -> None:
    stream.write(msg.encode())
    stream.flush()
