"""Accuracy metrics, synthetic pair sets and manifest evaluation."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from aeroground.io import kvfile, pgm
from aeroground.io.manifest import PairEntry, PairManifest
from aeroground.pipeline import PipelineConfig, register
from aeroground.spatial import Raster, Sim2, warp

SCALE_TRUTH_FLOOR = 1e-6
ROT_TRUTH_FLOOR_DEG = 0.01
XY_TOLERANCE_PX = 2.0
# joint tolerance used for "recovered"
RECOVERY_TOLERANCE = (3.0, 0.05, 2.0)


def _relative_accuracy(estimates, truths, floor: float) -> tuple[float, int]:
    est = np.asarray(estimates, dtype=np.float64)
    gt = np.asarray(truths, dtype=np.float64)
    if est.shape != gt.shape:
        raise ValueError(f"{est.size} estimates vs {gt.size} ground truths")
    keep = np.abs(gt) >= floor
    if not keep.any():
        raise ValueError("no entries left after excluding near-zero ground truth")
    terms = 1.0 - np.abs((est[keep] - gt[keep]) / gt[keep])
    return math.fsum(terms) / int(keep.sum()), int((~keep).sum())


def acc_scale(estimates: Sequence[float], truths: Sequence[float]) -> float:
    """Mean of ``1 - |s - s*| / |s*|``; not clamped, so it can go negative."""
    return _relative_accuracy(estimates, truths, SCALE_TRUTH_FLOOR)[0]


def acc_rot(estimates: Sequence[float], truths: Sequence[float]) -> float:
    """Same form as :func:`acc_scale`, on angles in degrees."""
    return _relative_accuracy(estimates, truths, ROT_TRUTH_FLOOR_DEG)[0]


@dataclass(frozen=True)
class EvalSummary:
    acc_scale: float
    acc_rot: float
    acc_xy: float
    recovered: float
    mean_latency: float  # milliseconds
    n: int
    excluded: int

    def to_report(self) -> str:
        return kvfile.dump(asdict(self))

    @classmethod
    def from_report(cls, text: str) -> EvalSummary:
        raw = kvfile.parse(text)
        return cls(
            float(raw["acc_scale"]),
            float(raw["acc_rot"]),
            float(raw["acc_xy"]),
            float(raw["recovered"]),
            float(raw["mean_latency"]),
            int(raw["n"]),
            int(raw["excluded"]),
        )

    def without_timing(self) -> dict:
        d = asdict(self)
        d.pop("mean_latency")
        return d


@dataclass(frozen=True)
class PairResult:
    entry: PairEntry
    estimate: Sim2
    latency: float  # milliseconds

    @property
    def rot_error(self) -> float:
        return abs(math.remainder(self.estimate.theta_deg - self.entry.theta_gt, 360.0))

    @property
    def scale_error(self) -> float:
        return abs(self.estimate.s - self.entry.scale_gt) / self.entry.scale_gt

    @property
    def xy_error(self) -> float:
        return math.hypot(self.estimate.tx - self.entry.tx_gt, self.estimate.ty - self.entry.ty_gt)

    def recovered(self, tol=RECOVERY_TOLERANCE) -> bool:
        return self.rot_error <= tol[0] and self.scale_error <= tol[1] and self.xy_error <= tol[2]


def _check_range(name, rng_pair, lo_bound=-math.inf, hi_bound=math.inf):
    lo, hi = rng_pair
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"{name} range must be finite with lo <= hi, got {rng_pair}")
    if lo < lo_bound or hi > hi_bound:
        raise ValueError(f"{name} range {rng_pair} outside [{lo_bound}, {hi_bound}]")


def generate_synthetic(
    image,
    n: int,
    out_dir,
    theta_range: tuple[float, float] = (10.0, 60.0),
    scale_range: tuple[float, float] = (0.8, 1.3),
    trans_range: float = 20.0,
    noise_sigma: float = 0.05,
    seed: int = 0,
) -> PairManifest:
    """Write ``n`` (template, source) pairs plus ``manifest.csv`` under ``out_dir``.

    Each ground-truth transform is what :func:`register` should return,
    i.e. ``source = warp(template, gt^-1) + noise``.  Angles are degrees;
    ``trans_range`` bounds each translation component.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _check_range("theta", theta_range)
    _check_range("scale", scale_range, 0.5, 2.0)
    if not trans_range >= 0 or not noise_sigma >= 0:
        raise ValueError("trans_range and noise_sigma must be non-negative")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # quantize once so the template on disk and in memory agree
    template = pgm.decode(pgm.encode(image))
    pgm.write(out / "template.pgm", template)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n):
        theta = rng.uniform(*theta_range)
        scale = rng.uniform(*scale_range)
        tx, ty = rng.uniform(-trans_range, trans_range, size=2)
        gt = Sim2(scale, math.radians(theta), tx, ty)
        src = np.asarray(warp(template, gt.inverse()))
        if noise_sigma > 0:
            src = src + rng.normal(0.0, noise_sigma, src.shape)
        name = f"source_{i:04d}.pgm"
        pgm.write(out / name, Raster.clipped(src))
        entries.append(PairEntry("template.pgm", name, float(theta), float(scale), float(tx), float(ty)))
    manifest = PairManifest(entries, out)
    manifest.save(out / "manifest.csv")
    return manifest


def _register_entry(manifest: PairManifest, entry: PairEntry, cfg: PipelineConfig) -> PairResult | None:
    try:
        template = pgm.read(manifest.resolve(entry.template_path))
        source = pgm.read(manifest.resolve(entry.source_path))
    except (OSError, ValueError):
        return None
    start = time.perf_counter()
    est = register(template, source, cfg)
    return PairResult(entry, est.transform, (time.perf_counter() - start) * 1000.0)


def evaluate_results(results: Sequence[PairResult | None]) -> EvalSummary:
    """Aggregate per-pair results; ``None`` marks an unreadable entry."""
    done = [r for r in results if r is not None]
    if not done:
        raise ValueError("no manifest entry could be registered")
    unreadable = len(results) - len(done)
    s_est = [r.estimate.s for r in done]
    s_gt = [r.entry.scale_gt for r in done]
    th_est = [r.estimate.theta_deg for r in done]
    th_gt = [r.entry.theta_gt for r in done]
    near_zero = sum(
        abs(r.entry.scale_gt) < SCALE_TRUTH_FLOOR or abs(r.entry.theta_gt) < ROT_TRUTH_FLOOR_DEG for r in done
    )
    try:
        a_scale = acc_scale(s_est, s_gt)
    except ValueError:
        a_scale = math.nan
    try:
        a_rot = acc_rot(th_est, th_gt)
    except ValueError:
        a_rot = math.nan
    n = len(done)
    return EvalSummary(
        acc_scale=a_scale,
        acc_rot=a_rot,
        acc_xy=sum(r.xy_error <= XY_TOLERANCE_PX for r in done) / n,
        recovered=sum(r.recovered() for r in done) / n,
        mean_latency=math.fsum(r.latency for r in done) / n,
        n=n,
        excluded=unreadable + near_zero,
    )


def evaluate(
    manifest: PairManifest, cfg: PipelineConfig = PipelineConfig(), workers: int = 1
) -> tuple[EvalSummary, list[PairResult | None]]:
    """Register every manifest pair and summarize.

    Unreadable pairs are skipped and counted as excluded, as are entries
    whose rotation or scale truth is too close to zero for the relative
    accuracy formulas.
    """
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda e: _register_entry(manifest, e, cfg), manifest.entries))
    else:
        results = [_register_entry(manifest, e, cfg) for e in manifest.entries]
    return evaluate_results(results), results
