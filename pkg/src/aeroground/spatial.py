"""Rasters, 2-D similarity transforms and image warping.

Coordinates are continuous pixel positions ``(x, y)`` with ``x`` along
columns and ``y`` along rows (y points down).  A :class:`Sim2` acts about a
center ``c`` as ``p' = s * R(theta) @ (p - c) + c + t`` where ``R`` is the
usual matrix ``[[cos, -sin], [sin, cos]]``; positive angles therefore turn
the +x axis toward +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage


class PixelPoint(NamedTuple):
    x: float
    y: float


def normalize_angle(theta: float) -> float:
    """Wrap an angle in radians into ``(-pi, pi]``."""
    wrapped = math.pi - math.fmod(math.pi - theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Sim2:
    """Similarity transform: uniform scale, rotation, then translation."""

    s: float = 1.0
    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        for name in ("s", "theta", "tx", "ty"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Sim2.{name} must be finite")
        if self.s <= 0:
            raise ValueError(f"scale must be positive, got {self.s}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))
        object.__setattr__(self, "tx", float(self.tx))
        object.__setattr__(self, "ty", float(self.ty))

    @classmethod
    def identity(cls) -> Sim2:
        return cls()

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> Sim2:
        m = np.asarray(m, dtype=float)
        s = math.hypot(m[0, 0], m[1, 0])
        theta = math.atan2(m[1, 0], m[0, 0])
        return cls(s, theta, m[0, 2], m[1, 2])

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)

    def matrix(self) -> np.ndarray:
        """Homogeneous 3x3 form ``[[sR, t], [0, 1]]``."""
        c = self.s * math.cos(self.theta)
        sn = self.s * math.sin(self.theta)
        return np.array([[c, -sn, self.tx], [sn, c, self.ty], [0.0, 0.0, 1.0]])

    def compose(self, other: Sim2) -> Sim2:
        """Matrix product ``self @ other``: apply ``other`` first."""
        return Sim2.from_matrix(self.matrix() @ other.matrix())

    __matmul__ = compose

    def inverse(self) -> Sim2:
        inv_s = 1.0 / self.s
        c = math.cos(-self.theta) * inv_s
        sn = math.sin(-self.theta) * inv_s
        return Sim2(
            inv_s,
            -self.theta,
            -(c * self.tx - sn * self.ty),
            -(sn * self.tx + c * self.ty),
        )

    def apply_point(self, p, center=(0.0, 0.0)) -> PixelPoint:
        px, py = float(p[0]) - center[0], float(p[1]) - center[1]
        c = self.s * math.cos(self.theta)
        sn = self.s * math.sin(self.theta)
        return PixelPoint(
            c * px - sn * py + center[0] + self.tx,
            sn * px + c * py + center[1] + self.ty,
        )

    def is_close(self, other: Sim2, atol: float = 1e-9) -> bool:
        return (
            abs(self.s - other.s) <= atol
            and abs(normalize_angle(self.theta - other.theta)) <= atol
            and abs(self.tx - other.tx) <= atol
            and abs(self.ty - other.ty) <= atol
        )


class Raster:
    """Single-channel image with intensities in ``[0, 1]``.

    The pixel grid is held as a read-only ``(height, width)`` float64 array,
    so ``np.asarray(raster)`` works wherever an array is expected.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"raster must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("raster intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("raster intensities must lie in [0, 1]")
        arr.setflags(write=False)
        self.data = arr

    @classmethod
    def clipped(cls, data) -> Raster:
        """Build from an arbitrary finite array by clipping into ``[0, 1]``."""
        return cls(np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0))

    @classmethod
    def from_bytes(cls, width: int, height: int, values: bytes) -> Raster:
        """8-bit row-major samples, scaled by 1/255."""
        arr = np.frombuffer(values, dtype=np.uint8)
        if arr.size != width * height:
            raise ValueError(f"expected {width * height} samples, got {arr.size}")
        return cls(arr.reshape(height, width) / 255.0)

    def to_bytes(self) -> bytes:
        return np.rint(self.data * 255.0).astype(np.uint8).tobytes()

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def center(self) -> PixelPoint:
        return PixelPoint((self.width - 1) / 2.0, (self.height - 1) / 2.0)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self):
        return f"Raster({self.width}x{self.height})"


def grid_center(width: int, height: int) -> PixelPoint:
    return PixelPoint((width - 1) / 2.0, (height - 1) / 2.0)


def _source_coords(S: Sim2, in_shape, out_width: int, out_height: int):
    """Inverse-map every output pixel to input coordinates."""
    cin = grid_center(in_shape[1], in_shape[0])
    cout = grid_center(out_width, out_height)
    inv = S.inverse()
    ys, xs = np.mgrid[0:out_height, 0:out_width].astype(np.float64)
    # translation of S is removed before undoing the linear part
    dx = xs - cout.x - S.tx
    dy = ys - cout.y - S.ty
    c = inv.s * math.cos(inv.theta)
    sn = inv.s * math.sin(inv.theta)
    qx = c * dx - sn * dy + cin.x
    qy = sn * dx + c * dy + cin.y
    return qx, qy


def _inside(qx, qy, in_shape, tol=1e-9):
    h, w = in_shape
    return (qx >= -tol) & (qx <= w - 1 + tol) & (qy >= -tol) & (qy <= h - 1 + tol)


def _check_out_dims(image_shape, out_width, out_height):
    if out_width is None:
        out_width = image_shape[1]
    if out_height is None:
        out_height = image_shape[0]
    if out_width <= 0 or out_height <= 0:
        raise ValueError(f"output size must be positive, got {out_width}x{out_height}")
    return int(out_width), int(out_height)


def warp(image, S: Sim2, out_width: int | None = None, out_height: int | None = None) -> Raster:
    """Resample ``image`` through ``S`` with bilinear interpolation.

    ``S`` maps input coordinates (about the input center) to output
    coordinates (about the output center).  Each output pixel is pulled from
    ``S^-1`` of its position; samples falling outside the input are 0.
    """
    arr = np.asarray(image, dtype=np.float64)
    out_width, out_height = _check_out_dims(arr.shape, out_width, out_height)
    qx, qy = _source_coords(S, arr.shape, out_width, out_height)
    inside = _inside(qx, qy, arr.shape)
    qx = np.clip(qx, 0.0, arr.shape[1] - 1)
    qy = np.clip(qy, 0.0, arr.shape[0] - 1)
    out = ndimage.map_coordinates(arr, [qy, qx], order=1, mode="nearest", prefilter=False)
    out[~inside] = 0.0
    return Raster.clipped(out)


def warp_support(in_width: int, in_height: int, S: Sim2, out_width: int, out_height: int) -> np.ndarray:
    """Boolean mask of output pixels that ``warp`` fills from real input."""
    out_width, out_height = _check_out_dims((in_height, in_width), out_width, out_height)
    qx, qy = _source_coords(S, (in_height, in_width), out_width, out_height)
    return _inside(qx, qy, (in_height, in_width))


def resample(image, width: int, height: int | None = None) -> Raster:
    """Isotropically rescale ``image`` into a ``width x height`` frame.

    The longer side is fitted to the frame and centers are kept aligned, so
    non-square inputs are zero-padded rather than stretched.
    """
    arr = np.asarray(image, dtype=np.float64)
    height = width if height is None else height
    k = min(width / arr.shape[1], height / arr.shape[0])
    if k == 1.0 and arr.shape == (height, width):
        return image if isinstance(image, Raster) else Raster(arr)
    return warp(arr, Sim2(s=k), width, height)


def fit_scale(width: int, height: int, working_size: int) -> float:
    """Scale factor applied by :func:`resample` into a square working frame."""
    return min(working_size / width, working_size / height)


def hann_window(n: int) -> np.ndarray:
    if n == 1:
        return np.ones(1)
    i = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * i / (n - 1))


def apodize(image) -> Raster:
    """Multiply by a separable Hann window (zero at the borders)."""
    arr = np.asarray(image, dtype=np.float64)
    win = np.outer(hann_window(arr.shape[0]), hann_window(arr.shape[1]))
    return Raster.clipped(arr * win)
