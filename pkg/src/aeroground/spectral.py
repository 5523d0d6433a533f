"""Radix-2 2-D DFT and magnitude-spectrum conditioning.

Spectra are plain complex128 arrays of shape ``(height, width)``; both sides
must be powers of two.  Twiddle and bit-reversal tables are built once per
length and cached read-only, so concurrent callers can share them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class SizingError(ValueError):
    """Raised when a transform length is not a power of two."""


@dataclass(frozen=True)
class SpectralConfig:
    log_offset: float = 1.0
    highpass_enabled: bool = True

    def __post_init__(self):
        if not self.log_offset > 0:
            raise ValueError(f"log_offset must be > 0, got {self.log_offset}")


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _tables(n: int):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    twiddle = np.exp(-2j * np.pi * np.arange(n // 2) / n)
    stages = []
    m = 2
    while m <= n:
        w = np.ascontiguousarray(twiddle[:: n // m][: m // 2])
        w.setflags(write=False)
        stages.append((m, w))
        m *= 2
    rev.setflags(write=False)
    return rev, tuple(stages)


def _fft_rows(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Iterative decimation-in-time FFT along the last axis (unnormalized)."""
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise SizingError(f"FFT length must be a power of two, got {n}")
    rev, stages = _tables(n)
    lead = x.shape[:-1]
    y = np.array(x[..., rev], dtype=np.complex128)
    for m, w in stages:
        if inverse:
            w = w.conj()
        half = m // 2
        y = y.reshape(lead + (n // m, m))
        even = y[..., :half]
        odd = y[..., half:] * w
        top = even + odd
        odd = np.subtract(even, odd, out=odd)
        y[..., :half] = top
        y[..., half:] = odd
    return y.reshape(lead + (n,))


def _check_pow2(shape):
    h, w = shape
    if not (is_power_of_two(h) and is_power_of_two(w)):
        raise SizingError(f"dimensions must be powers of two, got {w}x{h}")


def dft2(image) -> np.ndarray:
    """Forward unnormalized 2-D DFT."""
    x = np.asarray(image)
    if x.ndim != 2:
        raise ValueError("dft2 expects a 2-D array")
    _check_pow2(x.shape)
    rows = _fft_rows(x)
    return np.ascontiguousarray(_fft_rows(rows.T).T)


def idft2(spec) -> np.ndarray:
    """Inverse 2-D DFT with ``1 / (w h)`` normalization; returns complex."""
    X = np.asarray(spec)
    if X.ndim != 2:
        raise ValueError("idft2 expects a 2-D array")
    _check_pow2(X.shape)
    rows = _fft_rows(X, inverse=True)
    out = _fft_rows(rows.T, inverse=True).T
    return np.ascontiguousarray(out) / X.size


def fftshift(field) -> np.ndarray:
    """Swap quadrants so the zero-frequency bin moves to ``(h//2, w//2)``."""
    a = np.asarray(field)
    return np.roll(a, (a.shape[0] // 2, a.shape[1] // 2), axis=(0, 1))


def ifftshift(field) -> np.ndarray:
    a = np.asarray(field)
    return np.roll(a, (-(a.shape[0] // 2), -(a.shape[1] // 2)), axis=(0, 1))


def log_magnitude(spec, cfg: SpectralConfig = SpectralConfig()) -> np.ndarray:
    return np.log(cfg.log_offset + np.abs(spec))


@lru_cache(maxsize=8)
def _highpass_filter(h: int, w: int) -> np.ndarray:
    eta = (np.arange(h) - h // 2) / h
    xi = (np.arange(w) - w // 2) / w
    x = np.outer(np.cos(np.pi * eta), np.cos(np.pi * xi))
    filt = (1.0 - x) * (2.0 - x)
    filt.setflags(write=False)
    return filt


def highpass(mag) -> np.ndarray:
    """Raised-cosine emphasis filter for a centered (fftshifted) field.

    ``H = (1 - X)(2 - X)`` with ``X = cos(pi xi) cos(pi eta)``; zero at DC,
    at most 2 at the band edge.
    """
    m = np.asarray(mag, dtype=np.float64)
    return m * _highpass_filter(*m.shape)
