"""Phase correlation and correlation-peak estimators.

:func:`correlate` returns a centered surface whose peak sits at the
circular shift of ``b`` relative to ``a``: if ``b(x) = a(x - d)`` the peak
is at ``center + d``.  Shifts are reported as ``(dx, dy)`` = (columns, rows).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from aeroground.spectral import dft2, fftshift, idft2


@dataclass(frozen=True)
class CorrelationSurface:
    data: np.ndarray
    centered: bool = True

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("correlation surface must be a non-empty 2-D grid")
        if not np.all(np.isfinite(arr)):
            raise ValueError("correlation surface must be finite")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def dynamic_range(self) -> float:
        return float(self.data.max() - self.data.min())

    def zero_bin(self) -> tuple[int, int]:
        """(row, col) of the zero-shift bin."""
        if self.centered:
            return self.height // 2, self.width // 2
        return 0, 0


@dataclass(frozen=True)
class PeakEstimate:
    dx: float
    dy: float
    confidence: float


@dataclass(frozen=True)
class SoftArgmaxGradients:
    # shape (2, h, w): d(dx)/d(surface), d(dy)/d(surface); zero outside the window
    d_estimate_d_surface: np.ndarray
    d_estimate_d_temperature: tuple[float, float]


def cross_power_spectrum(Fa, Fb, eps: float = 1e-8) -> np.ndarray:
    """Normalized cross-power ``Fa conj(Fb) / (|Fa conj(Fb)| + eps)``."""
    Fa = np.asarray(Fa)
    Fb = np.asarray(Fb)
    if Fa.shape != Fb.shape:
        raise ValueError(f"spectrum shapes differ: {Fa.shape} vs {Fb.shape}")
    prod = Fa * np.conj(Fb)
    return prod / (np.abs(prod) + eps)


def correlate(a, b, eps: float = 1e-8) -> CorrelationSurface:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    # b's spectrum first so a positive shift of b lands at +d
    cps = cross_power_spectrum(dft2(b), dft2(a), eps)
    return CorrelationSurface(fftshift(idft2(cps).real), centered=True)


def _confidence(data: np.ndarray, peak: float) -> float:
    denom = data.mean() + 3.0 * data.std()
    if denom <= 0 or peak <= 0:
        return 0.0
    return float(peak / denom)


def _argmax_bin(surf: CorrelationSurface) -> tuple[int, int]:
    # np.argmax returns the first (smallest row-major) index among ties
    flat = int(np.argmax(surf.data))
    return divmod(flat, surf.width)


def peak_argmax(surf: CorrelationSurface) -> PeakEstimate:
    row, col = _argmax_bin(surf)
    r0, c0 = surf.zero_bin()
    peak = surf.data[row, col]
    return PeakEstimate(float(col - c0), float(row - r0), _confidence(surf.data, peak))


def _window(surf: CorrelationSurface, window_radius: int):
    """Circular window around the argmax: values plus unwrapped shifts."""
    h, w = surf.data.shape
    r = int(min(window_radius, (h - 1) // 2, (w - 1) // 2))
    row, col = _argmax_bin(surf)
    r0, c0 = surf.zero_bin()
    off = np.arange(-r, r + 1)
    rows = (row + off) % h
    cols = (col + off) % w
    values = surf.data[np.ix_(rows, cols)]
    shift_y = np.broadcast_to((row - r0 + off)[:, None], values.shape)
    shift_x = np.broadcast_to((col - c0 + off)[None, :], values.shape)
    return values, shift_x, shift_y, rows, cols


def _softmax(values: np.ndarray, temperature: float) -> np.ndarray:
    z = (values - values.max()) / temperature
    p = np.exp(z)
    return p / p.sum()


def _check_args(temperature: float, window_radius: int):
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if window_radius < 1:
        raise ValueError(f"window_radius must be >= 1, got {window_radius}")


def peak_softargmax(surf: CorrelationSurface, temperature: float, window_radius: int = 8) -> PeakEstimate:
    """Expected shift under ``softmax(window / temperature)``.

    The window of ``(2r+1)^2`` bins is centered on the argmax and wraps
    around the surface edges; the returned shift is therefore not confined to
    the surface extent.  ``temperature`` is in surface units.
    """
    _check_args(temperature, window_radius)
    values, sx, sy, _, _ = _window(surf, window_radius)
    p = _softmax(values, temperature)
    row, col = _argmax_bin(surf)
    return PeakEstimate(
        float((p * sx).sum()),
        float((p * sy).sum()),
        _confidence(surf.data, surf.data[row, col]),
    )


def softargmax_gradients(
    surf: CorrelationSurface, temperature: float, window_radius: int = 8
) -> SoftArgmaxGradients:
    """Closed-form derivatives of :func:`peak_softargmax`.

    With ``p = softmax(v / T)`` and ``e = sum(p x)``:
    ``de/dv_k = p_k (x_k - e) / T`` and ``de/dT = -cov_p(x, v) / T**2``.
    The window location is held fixed (it is piecewise constant in ``v``).
    """
    _check_args(temperature, window_radius)
    values, sx, sy, rows, cols = _window(surf, window_radius)
    p = _softmax(values, temperature)
    grads = np.zeros((2,) + surf.data.shape)
    vbar = (p * values).sum()
    d_temp = []
    for axis, shifts in enumerate((sx, sy)):
        est = (p * shifts).sum()
        grads[axis][np.ix_(rows, cols)] = p * (shifts - est) / temperature
        cov = (p * (shifts - est) * (values - vbar)).sum()
        d_temp.append(float(-cov / temperature**2))
    return SoftArgmaxGradients(grads, (d_temp[0], d_temp[1]))


def calibrate_temperature(
    pairs: Sequence[tuple[CorrelationSurface, tuple[float, float]]],
    tau_grid: Sequence[float],
    window_radius: int = 8,
) -> float:
    """Pick the grid temperature with the lowest mean shift error.

    Grid values are relative to each surface's dynamic range (the convention
    of ``PipelineConfig.temperature``).  Error is the Euclidean distance
    between estimated and true ``(dx, dy)``; ties go to the smaller value.
    """
    if not pairs:
        raise ValueError("calibration needs at least one (surface, shift) pair")
    if not tau_grid:
        raise ValueError("calibration needs a non-empty temperature grid")
    best_tau, best_err = None, np.inf
    for tau in sorted(tau_grid):
        if not tau > 0:
            raise ValueError(f"grid temperatures must be positive, got {tau}")
        errs = []
        for surf, (tx, ty) in pairs:
            scale = surf.dynamic_range or 1.0
            est = peak_softargmax(surf, tau * scale, window_radius)
            errs.append(np.hypot(est.dx - tx, est.dy - ty))
        err = float(np.mean(errs))
        if err < best_err:
            best_tau, best_err = tau, err
    return best_tau
