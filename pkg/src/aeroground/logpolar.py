"""Log-polar resampling of centered magnitude spectra.

Rows index angle over ``[0, pi)`` (the magnitude of a real image's spectrum
is point symmetric, so the other half-plane is redundant), columns index
log-radius from 1 to ``max_radius``.  A rotation of the image by ``a`` shows
up as a circular shift of ``a * angular_bins / pi`` rows; enlarging the
image by ``k`` moves the spectrum inward, i.e. ``-log(k) / log(log_base)``
columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from aeroground.spatial import normalize_angle


@dataclass(frozen=True)
class LogPolarConfig:
    angular_bins: int = 256
    radial_bins: int = 256
    max_radius: float = 128.0

    def __post_init__(self):
        if self.angular_bins < 8 or self.radial_bins < 8:
            raise ValueError("angular_bins and radial_bins must be >= 8")
        if not self.max_radius > 1:
            raise ValueError(f"max_radius must exceed 1, got {self.max_radius}")

    @classmethod
    def for_size(cls, size: int, angular_bins: int = 256, radial_bins: int = 256) -> LogPolarConfig:
        return cls(angular_bins, radial_bins, size / 2.0)

    @property
    def log_base(self) -> float:
        return math.exp(math.log(self.max_radius) / (self.radial_bins - 1))


@dataclass(frozen=True)
class RotScale:
    theta: float
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"scale must be positive, got {self.s}")
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))
        object.__setattr__(self, "s", float(self.s))

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)


@lru_cache(maxsize=8)
def _sample_grid(cfg: LogPolarConfig, cx: float, cy: float):
    phi = np.arange(cfg.angular_bins) * math.pi / cfg.angular_bins
    radius = cfg.log_base ** np.arange(cfg.radial_bins)
    xs = cx + np.outer(np.cos(phi), radius)
    ys = cy + np.outer(np.sin(phi), radius)
    for a in (xs, ys):
        a.setflags(write=False)
    return xs, ys


def logpolar_resample(mag, cfg: LogPolarConfig) -> np.ndarray:
    """Sample a centered field on the ``(angle, log-radius)`` grid.

    The pole sits on the DC bin of an fftshifted field, ``(w//2, h//2)``.
    The field is treated as periodic (it is a DFT), so the ring at radius
    ``n/2`` is complete; samples outside the inscribed disk are 0.
    """
    m = np.asarray(mag, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"log-polar resampling needs a square field, got shape {m.shape}")
    n = m.shape[0]
    c = float(n // 2)
    xs, ys = _sample_grid(cfg, c, c)
    out = ndimage.map_coordinates(m, [ys, xs], order=1, mode="grid-wrap", prefilter=False)
    radius = np.broadcast_to(cfg.log_base ** np.arange(cfg.radial_bins), out.shape)
    out[radius > n / 2 * (1 + 1e-12)] = 0.0
    return out


def delta_to_rot_scale(drow: float, dcol: float, cfg: LogPolarConfig) -> RotScale:
    """Turn a log-polar shift of the source relative to the template into ``(theta, s)``.

    ``theta = drow * pi / angular_bins`` and ``s = log_base ** -dcol``: the
    result describes the source as the template rotated by ``theta`` and
    enlarged by ``s``, so ``s > 1`` means the source has to be shrunk to
    match.
    """
    theta = drow * math.pi / cfg.angular_bins
    s = cfg.log_base ** (-dcol)
    return RotScale(theta, s)
