"""Drone and ground-robot state machines.

Each agent consumes one :class:`WireMessage` at a time and returns the
messages it wants sent.  Any message arriving out of protocol order raises
:class:`ProtocolError`; agents never guess their way past a bad sequence.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from aeroground.pipeline import PipelineConfig, RegistrationEstimate, register
from aeroground.spatial import Raster, Sim2, warp
from aeroground.sim.wire import (
    Tag,
    WireMessage,
    image_message,
    localization_message,
    parse_image,
    parse_localization,
)
from aeroground.sim.world import GlobalMap, MapTile, feasible_region, segment_toy, tile_lookup


class ProtocolError(RuntimeError):
    """A message arrived that the agent's state does not allow."""


class DroneState(enum.Enum):
    IDLE = "idle"
    LOCALIZED = "localized"


@dataclass
class DroneAgent:
    """Drone side: tile lookup, segmentation, registration, reply.

    ``heading_prior`` and ``scale_prior`` are the drone's own coarse
    estimate of the ground robot's heading and view scale; translation comes
    from the localization message relative to the matched tile center.
    """

    global_map: GlobalMap
    cfg: PipelineConfig = field(default_factory=lambda: PipelineConfig(feature_mode="gradient-magnitude"))
    heading_prior: float = 0.0
    scale_prior: float = 1.0
    use_precomputed_segmentation: bool = True
    segment_threshold: float = 0.3

    state: DroneState = DroneState.IDLE
    location: tuple[float, float] | None = None
    tile: MapTile | None = None
    initial: Sim2 | None = None
    refined: Sim2 | None = None
    estimate: RegistrationEstimate | None = None
    fell_back: bool = False
    latencies: dict = field(default_factory=dict)

    def handle(self, msg: WireMessage) -> list[WireMessage]:
        if msg.tag is Tag.LOCALIZATION:
            if self.state is not DroneState.IDLE:
                raise ProtocolError("drone received a second localization before the sensor image")
            start = time.perf_counter()
            self.location = parse_localization(msg)
            self.tile = tile_lookup(self.global_map, self.location)
            self.state = DroneState.LOCALIZED
            self.latencies["tile_lookup"] = (time.perf_counter() - start) * 1000.0
            return []
        if msg.tag is Tag.SENSOR_IMAGE:
            if self.state is not DroneState.LOCALIZED:
                raise ProtocolError("drone received a sensor image before any localization")
            reply = self._refine(parse_image(msg))
            self.state = DroneState.IDLE
            return [reply]
        raise ProtocolError(f"drone does not accept {msg.tag.name} messages")

    def initial_transform(self) -> Sim2:
        cx, cy = self.global_map.tile_center(self.tile)
        mpp = self.global_map.meters_per_pixel
        return Sim2(
            self.scale_prior,
            self.heading_prior,
            (self.location[0] - cx) / mpp,
            (self.location[1] - cy) / mpp,
        )

    def _refine(self, sensor: Raster) -> WireMessage:
        timer = time.perf_counter()
        if self.use_precomputed_segmentation:
            seg = self.tile.segmentation
        else:
            seg = segment_toy(self.tile.image, self.segment_threshold)
        now = time.perf_counter()
        self.latencies["segmentation"] = (now - timer) * 1000.0

        timer = now
        self.initial = self.initial_transform()
        coarse = warp(seg, self.initial, sensor.width, sensor.height)
        self.estimate = register(sensor, coarse, self.cfg)
        # translation evidence is computed after de-rotation, so it vouches for the whole chain
        self.fell_back = self.estimate.trans_confidence < self.cfg.confidence_threshold
        self.refined = self.initial if self.fell_back else self.estimate.transform @ self.initial
        now = time.perf_counter()
        self.latencies["registration"] = (now - timer) * 1000.0

        timer = now
        warped = warp(seg, self.refined, sensor.width, sensor.height)
        road = Raster((np.asarray(warped) >= 0.5).astype(np.float64))
        self.latencies["transform"] = (time.perf_counter() - timer) * 1000.0
        return image_message(road, Tag.SEGMENTED_IMAGE)


class GroundState(enum.Enum):
    READY = "ready"
    AWAITING_IMAGE = "awaiting_image"
    DONE = "done"


@dataclass
class GroundAgent:
    """Ground side: announce localization and view, then build the feasible region."""

    sensor: Raster
    localization: tuple[float, float]
    footprint: np.ndarray | None = None

    state: GroundState = GroundState.READY
    received: Raster | None = None
    feasible: Raster | None = None

    def start(self) -> list[WireMessage]:
        if self.state is not GroundState.READY:
            raise ProtocolError("ground robot already started")
        self.state = GroundState.AWAITING_IMAGE
        return [localization_message(*self.localization), image_message(self.sensor, Tag.SENSOR_IMAGE)]

    def handle(self, msg: WireMessage) -> list[WireMessage]:
        if msg.tag is not Tag.SEGMENTED_IMAGE:
            raise ProtocolError(f"ground robot does not accept {msg.tag.name} messages")
        if self.state is not GroundState.AWAITING_IMAGE:
            raise ProtocolError(f"segmented image arrived while ground robot was {self.state.value}")
        self.received = parse_image(msg)
        self.feasible = feasible_region(self.sensor, self.received, self.footprint)
        self.state = GroundState.DONE
        return []
