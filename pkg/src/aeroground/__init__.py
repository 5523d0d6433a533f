"""Aerial-ground image registration and collaboration simulator.

Core entry points::

    from aeroground import Raster, Sim2, PipelineConfig, register

    est = register(template, source, PipelineConfig())
    aligned = warp(source, est.transform, template.width, template.height)
"""

from aeroground.spatial import PixelPoint, Raster, Sim2, apodize, warp, warp_support
from aeroground.spectral import SpectralConfig, dft2, fftshift, highpass, idft2, log_magnitude
from aeroground.logpolar import LogPolarConfig, RotScale, delta_to_rot_scale, logpolar_resample
from aeroground.phasecorr import (
    CorrelationSurface,
    PeakEstimate,
    SoftArgmaxGradients,
    calibrate_temperature,
    correlate,
    cross_power_spectrum,
    peak_argmax,
    peak_softargmax,
    softargmax_gradients,
)
from aeroground.pipeline import (
    PipelineConfig,
    RegistrationEstimate,
    estimate_rot_scale,
    estimate_translation,
    feature_extract,
    register,
    resolve_ambiguity,
)

__version__ = "0.1.0"

__all__ = [
    "CorrelationSurface",
    "LogPolarConfig",
    "PeakEstimate",
    "PipelineConfig",
    "PixelPoint",
    "Raster",
    "RegistrationEstimate",
    "RotScale",
    "Sim2",
    "SoftArgmaxGradients",
    "SpectralConfig",
    "apodize",
    "calibrate_temperature",
    "correlate",
    "cross_power_spectrum",
    "delta_to_rot_scale",
    "dft2",
    "estimate_rot_scale",
    "estimate_translation",
    "feature_extract",
    "fftshift",
    "highpass",
    "idft2",
    "log_magnitude",
    "logpolar_resample",
    "peak_argmax",
    "peak_softargmax",
    "register",
    "resolve_ambiguity",
    "softargmax_gradients",
    "warp",
    "warp_support",
]
