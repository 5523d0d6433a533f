"""One collaboration episode end to end, plus scenario files.

A scenario fixes the map, the tile under the ground robot and the hidden
true pose (tile frame -> ground sensor frame).  The ground sensor image is
the tile warped by that pose plus Gaussian noise; pixels outside the warp
footprint read 0 so the ground robot can tell what it actually observed.
"""

from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from aeroground.io import kvfile, pgm
from aeroground.pipeline import PipelineConfig
from aeroground.spatial import Raster, Sim2, warp, warp_support
from aeroground.sim.agents import DroneAgent, GroundAgent, ProtocolError
from aeroground.sim.wire import WireFormatError, WireMessage
from aeroground.sim.world import GlobalMap, GpsNoiseModel, NoTileError, gps_initial_transform

MIN_INITIAL_ERROR_DEG = 0.5


def rotation_error_deg(estimate: Sim2, truth: Sim2) -> float:
    return abs(math.degrees(math.remainder(estimate.theta - truth.theta, 2.0 * math.pi)))


def scale_error(estimate: Sim2, truth: Sim2) -> float:
    return abs(estimate.s - truth.s) / truth.s


def improvement(initial_error: float, refined_error: float) -> float:
    """``1 - refined / initial``; 0 when the initial error is under 0.5 degrees."""
    if initial_error < MIN_INITIAL_ERROR_DEG:
        return 0.0
    return 1.0 - refined_error / initial_error


@dataclass(frozen=True)
class Scenario:
    global_map: GlobalMap
    tile_index: int
    true_pose: Sim2
    image_noise: float = 0.05
    seed: int = 0

    def ground_view(self) -> tuple[Raster, np.ndarray]:
        tile = self.global_map.tiles[self.tile_index]
        n = self.global_map.tile_size
        clean = np.asarray(warp(tile.image, self.true_pose, n, n))
        support = warp_support(n, n, self.true_pose, n, n)
        rng = np.random.default_rng([self.seed, 1])
        noisy = clean + rng.normal(0.0, self.image_noise, clean.shape)
        # 1/255 survives 8-bit quantization, keeping observed pixels non-zero
        sensor = np.where(support, np.clip(noisy, 1.0 / 255.0, 1.0), 0.0)
        return Raster(sensor), support


@dataclass
class EpisodeReport:
    initial_rot_error: float = math.nan
    refined_rot_error: float = math.nan
    initial_scale_error: float = math.nan
    refined_scale_error: float = math.nan
    improvement: float = math.nan
    feasible_region: Raster | None = None
    fell_back: bool = False
    initial: Sim2 | None = None
    refined: Sim2 | None = None
    rot_confidence: float = math.nan
    trans_confidence: float = math.nan
    trace: list[int] = field(default_factory=list)
    error: str | None = None
    latencies: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    def summary(self) -> dict:
        """Scalar fields, timing excluded."""
        out = {
            "initial_rot_error_deg": self.initial_rot_error,
            "refined_rot_error_deg": self.refined_rot_error,
            "initial_scale_error": self.initial_scale_error,
            "refined_scale_error": self.refined_scale_error,
            "improvement": self.improvement,
            "fell_back": self.fell_back,
            "rot_confidence": self.rot_confidence,
            "trans_confidence": self.trans_confidence,
            "trace": " ".join(f"0x{t:02x}" for t in self.trace),
            "error": self.error or "",
        }
        for name, sim in (("initial", self.initial), ("refined", self.refined)):
            if sim is not None:
                out.update({f"{name}_s": sim.s, f"{name}_theta": sim.theta, f"{name}_tx": sim.tx, f"{name}_ty": sim.ty})
        if self.feasible_region is not None:
            out["feasible_pixels"] = int(np.asarray(self.feasible_region).sum())
        return out

    def digest(self) -> str:
        """Hash over every non-timing field, feasible region bytes included."""
        h = hashlib.sha256()
        for key, value in self.summary().items():
            h.update(f"{key}={value!r};".encode())
        if self.feasible_region is not None:
            h.update(np.asarray(self.feasible_region).tobytes())
        return h.hexdigest()


def run_episode(
    scenario: Scenario,
    noise: GpsNoiseModel,
    cfg: PipelineConfig | None = None,
) -> EpisodeReport:
    """Run both agents over an in-memory ordered transport until the ground robot is done."""
    cfg = cfg or PipelineConfig(feature_mode="gradient-magnitude")
    gmap = scenario.global_map
    truth = scenario.true_pose
    report = EpisodeReport()

    sensor, support = scenario.ground_view()
    initial = gps_initial_transform(truth, noise, gmap.meters_per_pixel)
    cx, cy = gmap.tile_center(gmap.tiles[scenario.tile_index])
    mpp = gmap.meters_per_pixel
    location = (cx + initial.tx * mpp, cy + initial.ty * mpp)

    drone = DroneAgent(gmap, cfg, heading_prior=initial.theta, scale_prior=initial.s)
    ground = GroundAgent(sensor, location, footprint=support)
    to_drone: deque[bytes] = deque()
    to_ground: deque[bytes] = deque()

    try:
        to_drone.extend(m.encode() for m in ground.start())
        while to_drone or to_ground:
            if to_drone:
                msg = WireMessage.decode(to_drone.popleft())
                report.trace.append(int(msg.tag))
                to_ground.extend(m.encode() for m in drone.handle(msg))
            else:
                msg = WireMessage.decode(to_ground.popleft())
                report.trace.append(int(msg.tag))
                to_drone.extend(m.encode() for m in ground.handle(msg))
        if ground.feasible is None:
            raise ProtocolError("episode ended without a segmented image reaching the ground robot")
    except (ProtocolError, WireFormatError, NoTileError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        report.latencies = dict(drone.latencies)
        return report

    report.initial = drone.initial
    report.refined = drone.refined
    report.fell_back = drone.fell_back
    report.rot_confidence = drone.estimate.rot_confidence
    report.trans_confidence = drone.estimate.trans_confidence
    report.initial_rot_error = rotation_error_deg(drone.initial, truth)
    report.refined_rot_error = rotation_error_deg(drone.refined, truth)
    report.initial_scale_error = scale_error(drone.initial, truth)
    report.refined_scale_error = scale_error(drone.refined, truth)
    report.improvement = improvement(report.initial_rot_error, report.refined_rot_error)
    report.feasible_region = ground.feasible
    report.latencies = dict(drone.latencies)
    return report


# -- scenario files -----------------------------------------------------------

SCENARIO_DEFAULTS = {
    "map": "",
    "mask": "",
    "tile_grid": "2x2",
    "tile_size": "256",
    "meters_per_pixel": "0.5",
    "origin_x": "0",
    "origin_y": "0",
    "segment_threshold": "0.3",
    "tile": "random",
    "episodes": "1",
    "pose_theta_deg": "random",
    "pose_scale": "random",
    "pose_tx": "random",
    "pose_ty": "random",
    "pose_theta_range_deg": "180",
    "pose_scale_range": "0.85,1.2",
    "pose_trans_range": "10",
    "position_sigma": "2.0",
    "heading_range_deg": "90",
    "scale_sigma": "0.03",
    "image_noise": "0.05",
    "seed": "0",
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Parsed scenario file: a map plus recipes for drawing episodes."""

    global_map: GlobalMap
    settings: dict

    @classmethod
    def load(cls, path) -> ScenarioSpec:
        path = Path(path)
        raw = kvfile.load(path)
        return cls.from_settings(raw, base_dir=path.parent)

    @classmethod
    def from_settings(cls, raw: dict, base_dir: Path | None = None) -> ScenarioSpec:
        unknown = set(raw) - set(SCENARIO_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
        settings = {**SCENARIO_DEFAULTS, **raw}
        cols, rows = (int(v) for v in settings["tile_grid"].lower().split("x"))
        tile_size = int(settings["tile_size"])
        mpp = float(settings["meters_per_pixel"])
        origin = (float(settings["origin_x"]), float(settings["origin_y"]))
        seed = int(settings["seed"])
        base_dir = Path(".") if base_dir is None else base_dir
        if settings["map"]:
            mosaic = pgm.read(base_dir / settings["map"])
            if mosaic.shape != (rows * tile_size, cols * tile_size):
                raise ValueError(
                    f"map is {mosaic.width}x{mosaic.height}, expected {cols * tile_size}x{rows * tile_size}"
                )
            mask = pgm.read(base_dir / settings["mask"]) if settings["mask"] else None
            gmap = GlobalMap.from_mosaic(
                mosaic, tile_size, mpp, origin, segmentation=mask, threshold=float(settings["segment_threshold"])
            )
        else:
            gmap = GlobalMap.synthetic((cols, rows), tile_size, mpp, seed, origin)
        return cls(gmap, settings)

    @property
    def episodes(self) -> int:
        return int(self.settings["episodes"])

    def noise(self, index: int) -> GpsNoiseModel:
        s = self.settings
        return GpsNoiseModel(
            float(s["position_sigma"]),
            math.radians(float(s["heading_range_deg"])),
            float(s["scale_sigma"]),
            seed=episode_seed(int(s["seed"]), index, 2),
        )

    def scenario(self, index: int) -> Scenario:
        s = self.settings
        rng = np.random.default_rng([int(s["seed"]), index, 0])
        n_tiles = len(self.global_map.tiles)
        tile = int(rng.integers(n_tiles)) if s["tile"] == "random" else int(s["tile"])
        if not 0 <= tile < n_tiles:
            raise ValueError(f"tile index {tile} outside map with {n_tiles} tiles")
        theta_range = float(s["pose_theta_range_deg"])
        lo, hi = (float(v) for v in s["pose_scale_range"].split(","))
        trans = float(s["pose_trans_range"])
        # draw every random component, in a fixed order, so fixing one key leaves the rest unchanged
        draws = {
            "pose_theta_deg": rng.uniform(-theta_range, theta_range),
            "pose_scale": rng.uniform(lo, hi),
            "pose_tx": rng.uniform(-trans, trans),
            "pose_ty": rng.uniform(-trans, trans),
        }
        vals = {k: draws[k] if s[k] == "random" else float(s[k]) for k in draws}
        pose = Sim2(vals["pose_scale"], math.radians(vals["pose_theta_deg"]), vals["pose_tx"], vals["pose_ty"])
        return Scenario(
            self.global_map, tile, pose, float(s["image_noise"]), seed=episode_seed(int(s["seed"]), index, 1)
        )

    def run(self, cfg: PipelineConfig | None = None) -> list[EpisodeReport]:
        return [run_episode(self.scenario(i), self.noise(i), cfg) for i in range(self.episodes)]


def episode_seed(seed: int, index: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, index, stream]).generate_state(1)[0])

