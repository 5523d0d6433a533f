"""Fourier-Mellin registration: rotation/scale first, then translation.

Roles follow the collaboration setup: the ground view is the *template*, the
drone's (segmented) view is the *source*, and :func:`register` returns the
transform ``S`` with ``warp(source, S) ~ template``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import ndimage

from aeroground.logpolar import LogPolarConfig, RotScale, delta_to_rot_scale, logpolar_resample
from aeroground.phasecorr import PeakEstimate, correlate, peak_softargmax
from aeroground.spatial import Raster, Sim2, fit_scale, hann_window, resample, warp
from aeroground.spectral import SpectralConfig, dft2, fftshift, highpass, is_power_of_two, log_magnitude

FEATURE_MODES = ("identity", "gradient-magnitude")


@dataclass(frozen=True)
class PipelineConfig:
    working_size: int = 256
    # relative to each correlation surface's dynamic range
    temperature: float = 0.1
    window_radius: int = 8
    feature_mode: str = "identity"
    # the raised-cosine filter imprints its anisotropy on the noise floor
    highpass_enabled: bool = False
    logpolar: LogPolarConfig | None = None
    eps: float = 1e-8
    log_offset: float = 1.0
    confidence_threshold: float = 5.0

    def __post_init__(self):
        if not is_power_of_two(self.working_size) or self.working_size < 64:
            raise ValueError(f"working_size must be a power of two >= 64, got {self.working_size}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"feature_mode must be one of {FEATURE_MODES}, got {self.feature_mode!r}")
        if self.logpolar is None:
            object.__setattr__(self, "logpolar", LogPolarConfig.for_size(self.working_size))

    @property
    def spectral(self) -> SpectralConfig:
        return SpectralConfig(self.log_offset, self.highpass_enabled)

    @classmethod
    def from_mapping(cls, values: dict) -> PipelineConfig:
        """Build from string key/value pairs (config files, CLI)."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        lp = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key in ("angular_bins", "radial_bins"):
                lp[key] = int(raw)
                continue
            if key not in known or key == "logpolar":
                raise ValueError(f"unknown pipeline setting {key!r}")
            default = known[key].default
            if isinstance(default, bool):
                kwargs[key] = str(raw).strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = str(raw).strip()
        cfg = cls(**kwargs)
        if lp:
            cfg = replace(cfg, logpolar=LogPolarConfig.for_size(cfg.working_size, **lp))
        return cfg


@dataclass(frozen=True)
class RegistrationEstimate:
    transform: Sim2
    rot_confidence: float
    trans_confidence: float
    ambiguity_resolved_by_flip: bool
    elapsed: float  # milliseconds
    rot_scale: RotScale | None = field(default=None, compare=False)

    def confident(self, threshold: float) -> bool:
        return min(self.rot_confidence, self.trans_confidence) >= threshold


def feature_extract(image, mode: str = "identity") -> Raster:
    """Stand-in for a learned feature extractor.

    ``identity`` passes the image through; ``gradient-magnitude`` returns the
    Sobel gradient magnitude scaled so its maximum is 1 (all zeros for a flat
    image).
    """
    if mode == "identity":
        return image if isinstance(image, Raster) else Raster(image)
    if mode != "gradient-magnitude":
        raise ValueError(f"unknown feature mode {mode!r}")
    arr = np.asarray(image, dtype=np.float64)
    mag = np.hypot(ndimage.sobel(arr, axis=1, mode="nearest"), ndimage.sobel(arr, axis=0, mode="nearest"))
    peak = mag.max()
    if peak <= 1e-12:
        return Raster(np.zeros_like(arr))
    return Raster.clipped(mag / peak)


def _check_working(template, source, cfg: PipelineConfig):
    n = cfg.working_size
    for name, img in (("template", template), ("source", source)):
        if np.shape(img) != (n, n):
            raise ValueError(f"{name} must be {n}x{n} (working size), got {np.shape(img)}")


def _condition(image, mode: str) -> np.ndarray:
    """Feature map with its mean removed, then Hann-windowed.

    Without the mean removal the window alone would correlate perfectly
    between two flat images.
    """
    feat = np.asarray(feature_extract(image, mode))
    feat = feat - feat.mean()
    return feat * np.outer(hann_window(feat.shape[0]), hann_window(feat.shape[1]))


def _logpolar_features(image, cfg: PipelineConfig) -> np.ndarray:
    spec = fftshift(dft2(_condition(image, cfg.feature_mode)))
    mag = log_magnitude(spec, cfg.spectral)
    if cfg.highpass_enabled:
        mag = highpass(mag)
    return logpolar_resample(mag, cfg.logpolar)


def _soft_peak(surf, cfg: PipelineConfig) -> PeakEstimate:
    if surf.dynamic_range == 0.0:
        # no evidence at all (e.g. flat inputs): report zero shift, zero confidence
        return PeakEstimate(0.0, 0.0, 0.0)
    tau = cfg.temperature * surf.dynamic_range
    return peak_softargmax(surf, tau, cfg.window_radius)


def estimate_rot_scale(template, source, cfg: PipelineConfig) -> tuple[RotScale, float]:
    """Rotation and scale of ``source`` relative to ``template``.

    The result reads ``source ~ warp(template, Sim2(s, theta))`` up to
    translation, with ``theta`` in the half range ``(-pi/2, pi/2]``; the
    ``theta + pi`` alternative is left to :func:`resolve_ambiguity`.
    """
    _check_working(template, source, cfg)
    lp_t = _logpolar_features(template, cfg)
    lp_s = _logpolar_features(source, cfg)
    surf = correlate(lp_t, lp_s, cfg.eps)
    peak = _soft_peak(surf, cfg)
    rs = delta_to_rot_scale(peak.dy, peak.dx, cfg.logpolar)
    theta = rs.theta
    if theta > math.pi / 2:
        theta -= math.pi
    elif theta <= -math.pi / 2:
        theta += math.pi
    return RotScale(theta, rs.s), peak.confidence


def estimate_translation(template, aligned_source, cfg: PipelineConfig) -> PeakEstimate:
    """Shift ``d`` with ``aligned_source(x) ~ template(x - d)``, in pixels."""
    a = _condition(template, cfg.feature_mode)
    b = _condition(aligned_source, cfg.feature_mode)
    return _soft_peak(correlate(a, b, cfg.eps), cfg)


def _derotate(rs: RotScale) -> Sim2:
    return Sim2(rs.s, rs.theta).inverse()


def resolve_ambiguity(template, source, candidate: RotScale, cfg: PipelineConfig):
    """Choose between ``theta`` and ``theta + pi`` by translation evidence.

    Returns ``(rot_scale, translation_peak, flipped)``.  The flipped
    candidate has to beat the original strictly (by more than 1e-9).
    """
    n = cfg.working_size
    flipped = RotScale(candidate.theta + math.pi, candidate.s)
    best_rs = candidate
    best_peak = estimate_translation(template, warp(source, _derotate(candidate), n, n), cfg)
    alt_peak = estimate_translation(template, warp(source, _derotate(flipped), n, n), cfg)
    if alt_peak.confidence > best_peak.confidence + 1e-9:
        return flipped, alt_peak, True
    return best_rs, best_peak, False


def register(template, source, cfg: PipelineConfig = PipelineConfig()) -> RegistrationEstimate:
    """Estimate ``S`` such that ``warp(source, S, template dims)`` matches ``template``.

    Inputs of any size are fitted into the square working frame; the
    returned transform is expressed in the native pixel units of the two
    images (source center to template center).
    """
    start = time.perf_counter()
    t_arr = np.asarray(template, dtype=np.float64)
    s_arr = np.asarray(source, dtype=np.float64)
    n = cfg.working_size
    t_work = resample(t_arr, n)
    s_work = resample(s_arr, n)

    candidate, rot_conf = estimate_rot_scale(t_work, s_work, cfg)
    rs, peak, flipped = resolve_ambiguity(t_work, s_work, candidate, cfg)
    working = Sim2(tx=-peak.dx, ty=-peak.dy) @ _derotate(rs)

    k_t = fit_scale(t_arr.shape[1], t_arr.shape[0], n)
    k_s = fit_scale(s_arr.shape[1], s_arr.shape[0], n)
    native = Sim2(s=1.0 / k_t) @ working @ Sim2(s=k_s)
    elapsed = (time.perf_counter() - start) * 1000.0
    return RegistrationEstimate(native, rot_conf, peak.confidence, flipped, elapsed, rs)
