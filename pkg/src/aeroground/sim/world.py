"""Global map tiles, toy segmentation, GPS noise and feasible regions.

World axes are aligned with raster axes: world x grows with columns and
world y with rows, both in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from aeroground.spatial import Raster, Sim2
from aeroground.sim.scenes import synthetic_scene


class NoTileError(LookupError):
    """Localization falls outside every map tile."""


@dataclass(frozen=True)
class MapTile:
    image: Raster
    segmentation: Raster
    world_x: float  # top-left corner, meters
    world_y: float
    true_pose_to_ground: Sim2 = field(default_factory=Sim2)

    def __post_init__(self):
        seg = np.asarray(self.segmentation)
        if seg.shape != self.image.shape:
            raise ValueError("segmentation must match tile image dimensions")
        if not np.all((seg == 0.0) | (seg == 1.0)):
            raise ValueError("segmentation values must be 0 or 1")


@dataclass(frozen=True)
class GlobalMap:
    tiles: tuple[MapTile, ...]
    tile_size: int
    origin: tuple[float, float]
    meters_per_pixel: float

    def __post_init__(self):
        object.__setattr__(self, "tiles", tuple(self.tiles))
        if not self.meters_per_pixel > 0:
            raise ValueError("meters_per_pixel must be positive")
        extent = self.tile_extent
        seen = set()
        for tile in self.tiles:
            if tile.image.shape != (self.tile_size, self.tile_size):
                raise ValueError(f"tile raster must be {self.tile_size}x{self.tile_size}")
            col = (tile.world_x - self.origin[0]) / extent
            row = (tile.world_y - self.origin[1]) / extent
            cell = (round(col), round(row))
            if abs(col - cell[0]) > 1e-9 or abs(row - cell[1]) > 1e-9:
                raise ValueError("tiles must sit on the regular map grid")
            if cell in seen:
                raise ValueError(f"two tiles occupy grid cell {cell}")
            seen.add(cell)

    @property
    def tile_extent(self) -> float:
        return self.tile_size * self.meters_per_pixel

    def tile_center(self, tile: MapTile) -> tuple[float, float]:
        half = self.tile_extent / 2.0
        return tile.world_x + half, tile.world_y + half

    @classmethod
    def from_mosaic(
        cls,
        image,
        tile_size: int,
        meters_per_pixel: float = 1.0,
        origin: tuple[float, float] = (0.0, 0.0),
        segmentation=None,
        threshold: float = 0.3,
    ) -> GlobalMap:
        """Cut an overhead mosaic into a row-major grid of square tiles.

        Without a precomputed ``segmentation`` each tile is segmented with
        :func:`segment_toy` at ``threshold``.
        """
        arr = np.asarray(image, dtype=np.float64)
        rows, cols = arr.shape[0] // tile_size, arr.shape[1] // tile_size
        if rows == 0 or cols == 0:
            raise ValueError(f"mosaic {arr.shape} smaller than one {tile_size}px tile")
        seg = None if segmentation is None else np.asarray(segmentation, dtype=np.float64)
        tiles = []
        for r in range(rows):
            for c in range(cols):
                sl = np.s_[r * tile_size : (r + 1) * tile_size, c * tile_size : (c + 1) * tile_size]
                img = Raster(arr[sl])
                mask = Raster((seg[sl] >= 0.5).astype(float)) if seg is not None else segment_toy(img, threshold)
                tiles.append(
                    MapTile(
                        img,
                        mask,
                        origin[0] + c * tile_size * meters_per_pixel,
                        origin[1] + r * tile_size * meters_per_pixel,
                    )
                )
        return cls(tuple(tiles), tile_size, origin, meters_per_pixel)

    @classmethod
    def synthetic(
        cls,
        grid: tuple[int, int] = (2, 2),
        tile_size: int = 256,
        meters_per_pixel: float = 0.5,
        seed: int = 0,
        origin: tuple[float, float] = (0.0, 0.0),
    ) -> GlobalMap:
        """Procedural road mosaic of ``grid = (cols, rows)`` tiles with exact road masks."""
        cols, rows = grid
        image, mask = synthetic_scene(cols * tile_size, rows * tile_size, seed=seed, n_roads=3 + 2 * max(cols, rows))
        return cls.from_mosaic(image, tile_size, meters_per_pixel, origin, segmentation=mask)


def tile_lookup(gmap: GlobalMap, location: tuple[float, float]) -> MapTile:
    """The tile whose (closed) grid cell contains ``location``.

    A point on a shared edge or corner belongs to the tile listed first.
    """
    x, y = location
    extent = gmap.tile_extent
    tol = 1e-9 * max(1.0, extent)
    for tile in gmap.tiles:
        if tile.world_x - tol <= x <= tile.world_x + extent + tol and tile.world_y - tol <= y <= tile.world_y + extent + tol:
            return tile
    raise NoTileError(f"no map tile contains location ({x:.3f}, {y:.3f})")


def segment_toy(tile_image, threshold: float = 0.3) -> Raster:
    """Road mask for scenes whose roads are darker than their surroundings."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return Raster((np.asarray(tile_image) < threshold).astype(np.float64))


@dataclass(frozen=True)
class GpsNoiseModel:
    position_sigma: float = 0.0  # meters
    heading_range: float = 0.0  # radians, uniform half-width
    scale_sigma: float = 0.0  # log-scale standard deviation
    seed: int = 0

    def __post_init__(self):
        if min(self.position_sigma, self.heading_range, self.scale_sigma) < 0:
            raise ValueError("GPS noise parameters must be non-negative")


def gps_initial_transform(
    true_pose: Sim2,
    noise: GpsNoiseModel,
    meters_per_pixel: float = 1.0,
    rng: np.random.Generator | None = None,
) -> Sim2:
    """Perturb the true pose the way a GPS/compass prior would.

    Draw order is fixed (heading, scale, x, y) so a seed reproduces exactly.
    """
    rng = np.random.default_rng(noise.seed) if rng is None else rng
    dtheta = rng.uniform(-noise.heading_range, noise.heading_range)
    dscale = math.exp(rng.normal(0.0, noise.scale_sigma))
    sigma_px = noise.position_sigma / meters_per_pixel
    dx, dy = rng.normal(0.0, sigma_px, size=2)
    return Sim2(
        true_pose.s * dscale,
        true_pose.theta + dtheta,
        true_pose.tx + dx,
        true_pose.ty + dy,
    )


def feasible_region(sensor, road, support=None) -> Raster:
    """Drivable pixels: the received road mask restricted to valid coverage.

    ``support`` marks pixels the sensor actually observed; by default those
    are the non-zero sensor pixels.
    """
    sensor = np.asarray(sensor)
    road = np.asarray(road)
    if sensor.shape != road.shape:
        raise ValueError(f"sensor {sensor.shape} and road mask {road.shape} differ in size")
    covered = sensor > 0 if support is None else np.asarray(support, dtype=bool)
    if covered.shape != road.shape:
        raise ValueError("support mask must match the road mask size")
    return Raster(((road >= 0.5) & covered).astype(np.float64))
