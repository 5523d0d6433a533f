import io
import math
import socket
import struct
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aeroground.spatial import Raster, Sim2
from aeroground.sim.agents import DroneAgent, GroundAgent, ProtocolError
from aeroground.sim.episode import (
    EpisodeReport,
    Scenario,
    ScenarioSpec,
    improvement,
    rotation_error_deg,
    run_episode,
)
from aeroground.sim.scenes import synthetic_scene
from aeroground.sim.wire import (
    Tag,
    WireFormatError,
    WireMessage,
    image_message,
    localization_message,
    parse_image,
    parse_localization,
    read_frame,
    write_frame,
)
from aeroground.sim.world import (
    GlobalMap,
    GpsNoiseModel,
    MapTile,
    NoTileError,
    feasible_region,
    gps_initial_transform,
    segment_toy,
    tile_lookup,
)


@pytest.fixture(scope="module")
def gmap():
    return GlobalMap.synthetic((2, 2), 256, 0.5, seed=0)


def random_message(rng) -> WireMessage:
    tag = Tag(int(rng.integers(1, 4)))
    if tag is Tag.LOCALIZATION:
        return localization_message(*rng.uniform(-1e6, 1e6, 2))
    w, h = (int(v) for v in rng.integers(0, 24, 2))
    if tag is Tag.SEGMENTED_IMAGE:
        body = rng.choice(np.array([0, 255], dtype=np.uint8), size=w * h)
    else:
        body = rng.integers(0, 256, size=w * h, dtype=np.uint8)
    return WireMessage(tag, struct.pack(">II", w, h) + body.tobytes())


class TestWire:
    def test_layout(self):
        frame = localization_message(1.5, -2.0).encode()
        assert frame == struct.pack(">IB", 16, 1) + struct.pack(">dd", 1.5, -2.0)
        img = Raster(np.array([[0.0, 1.0, 0.5]]))
        frame = image_message(img).encode()
        assert frame == struct.pack(">IB", 11, 2) + struct.pack(">II", 3, 1) + bytes([0, 255, 128])

    def test_segmented_values_binary(self):
        msg = image_message(Raster(np.array([[0.2, 0.6]])), Tag.SEGMENTED_IMAGE)
        assert msg.payload[8:] == bytes([0, 255])
        with pytest.raises(WireFormatError):
            WireMessage.decode(WireMessage(Tag.SEGMENTED_IMAGE, struct.pack(">II", 1, 1) + b"\x07").encode())

    def test_fuzz_round_trip_10000(self):
        rng = np.random.default_rng(2024)
        for _ in range(10000):
            msg = random_message(rng)
            frame = msg.encode()
            back = WireMessage.decode(frame)
            assert back == msg and back.encode() == frame

    @given(st.binary(max_size=64))
    def test_random_bytes_never_misparse(self, data):
        try:
            msg = WireMessage.decode(data)
        except WireFormatError:
            return
        assert msg.encode() == data

    @pytest.mark.parametrize(
        "frame",
        [
            b"",
            b"\x00\x00\x00",
            struct.pack(">IB", 16, 9) + bytes(16),
            struct.pack(">IB", 15, 1) + bytes(15),
            struct.pack(">IB", 16, 1) + bytes(10),
            struct.pack(">IB", 16, 1) + bytes(17),
            struct.pack(">IB", 9, 2) + struct.pack(">II", 2, 1) + b"\x00",
        ],
    )
    def test_malformed(self, frame):
        with pytest.raises(WireFormatError):
            WireMessage.decode(frame)

    def test_parse_helpers(self, rng):
        assert parse_localization(localization_message(3.25, 7.5)) == (3.25, 7.5)
        img = Raster.from_bytes(5, 4, rng.integers(0, 256, 20, dtype=np.uint8).tobytes())
        assert parse_image(image_message(img)) == img

    def test_stream_over_socketpair(self, rng):
        msgs = [random_message(rng) for _ in range(50)]
        a, b = socket.socketpair()
        received = []

        def reader():
            with b.makefile("rb") as fh:
                while (m := read_frame(fh)) is not None:
                    received.append(m)

        t = threading.Thread(target=reader)
        t.start()
        with a.makefile("wb") as fh:
            for m in msgs:
                write_frame(fh, m)
        a.close()
        t.join(10)
        b.close()
        assert received == msgs

    def test_stream_truncated(self):
        frame = localization_message(1, 2).encode()
        with pytest.raises(WireFormatError):
            read_frame(io.BytesIO(frame[:-3]))
        assert read_frame(io.BytesIO(b"")) is None


class TestWorld:
    def test_tile_lookup(self, gmap):
        ext = gmap.tile_extent
        for tile in gmap.tiles:
            assert tile_lookup(gmap, gmap.tile_center(tile)) is tile
        # shared edge and shared corner go to the first-listed tile
        assert tile_lookup(gmap, (ext, ext / 2)) is gmap.tiles[0]
        assert tile_lookup(gmap, (ext, ext)) is gmap.tiles[0]
        with pytest.raises(NoTileError):
            tile_lookup(gmap, (-1.0, 5.0))
        with pytest.raises(NoTileError):
            tile_lookup(gmap, (2 * ext + 1, 5.0))

    def test_grid_validation(self, gmap):
        t = gmap.tiles[0]
        with pytest.raises(ValueError):
            GlobalMap((t, t), 256, (0, 0), 0.5)
        shifted = MapTile(t.image, t.segmentation, 10.0, 0.0)
        with pytest.raises(ValueError):
            GlobalMap((shifted,), 256, (0, 0), 0.5)
        with pytest.raises(ValueError):
            MapTile(t.image, Raster(np.full((256, 256), 0.5)), 0, 0)

    def test_segment_toy(self):
        assert not np.asarray(segment_toy(Raster(np.ones((8, 8))), 0.5)).any()
        img = np.full((8, 8), 0.9)
        img[3:5] = 0.1
        mask = np.asarray(segment_toy(Raster(img), 0.5))
        expected = np.zeros((8, 8))
        expected[3:5] = 1
        assert np.array_equal(mask, expected)
        assert np.array_equal(np.asarray(segment_toy(Raster(1 - mask), 0.5)), mask)
        with pytest.raises(ValueError):
            segment_toy(Raster(img), 1.0)

    def test_scene_masks_match_dark_roads(self):
        img, mask = synthetic_scene(128, seed=3)
        seg = np.asarray(segment_toy(Raster(img), 0.3)).astype(bool)
        assert (seg == mask).mean() > 0.97

    def test_gps_zero_noise(self):
        pose = Sim2(1.1, 0.3, 4, -2)
        assert gps_initial_transform(pose, GpsNoiseModel(), 0.5) == pose

    def test_gps_deterministic(self):
        noise = GpsNoiseModel(2.0, math.pi / 2, 0.05, seed=9)
        assert gps_initial_transform(Sim2(), noise) == gps_initial_transform(Sim2(), noise)

    def test_gps_heading_uniform_mean(self):
        rng = np.random.default_rng(77)
        noise = GpsNoiseModel(heading_range=math.radians(90))
        errs = [rotation_error_deg(gps_initial_transform(Sim2(), noise, rng=rng), Sim2()) for _ in range(10000)]
        assert np.mean(errs) == pytest.approx(45.0, abs=1.0)

    def test_gps_position_in_pixels(self):
        rng = np.random.default_rng(1)
        noise = GpsNoiseModel(position_sigma=2.0)
        tx = [gps_initial_transform(Sim2(), noise, 0.5, rng).tx for _ in range(4000)]
        assert np.std(tx) == pytest.approx(4.0, rel=0.05)

    def test_gps_negative_rejected(self):
        with pytest.raises(ValueError):
            GpsNoiseModel(position_sigma=-1)

    def test_feasible_region(self, rng):
        ones, zeros = np.ones((8, 8)), np.zeros((8, 8))
        assert np.array_equal(np.asarray(feasible_region(ones, ones)), ones)
        assert not np.asarray(feasible_region(ones, zeros)).any()
        support = np.zeros((8, 8), bool)
        support[:, :4] = True
        out = np.asarray(feasible_region(ones, ones, support))
        assert out[:, :4].all() and not out[:, 4:].any()
        with pytest.raises(ValueError):
            feasible_region(ones, np.ones((4, 4)))

    @given(st.integers(0, 2**31 - 1))
    def test_feasible_subset(self, seed):
        r = np.random.default_rng(seed)
        road = (r.random((6, 6)) > 0.5).astype(float)
        out = np.asarray(feasible_region(r.random((6, 6)), road, r.random((6, 6)) > 0.3))
        assert np.all(out <= road)


class TestAgents:
    def _agents(self, gmap):
        tile = gmap.tiles[0]
        sensor = tile.image
        drone = DroneAgent(gmap)
        ground = GroundAgent(sensor, gmap.tile_center(tile))
        return drone, ground

    def test_happy_path_trace(self, gmap):
        drone, ground = self._agents(gmap)
        out = ground.start()
        assert [m.tag for m in out] == [Tag.LOCALIZATION, Tag.SENSOR_IMAGE]
        assert drone.handle(out[0]) == []
        replies = drone.handle(out[1])
        assert [m.tag for m in replies] == [Tag.SEGMENTED_IMAGE]
        assert ground.handle(replies[0]) == []
        assert ground.feasible is not None
        assert set(drone.latencies) == {"tile_lookup", "segmentation", "registration", "transform"}

    def test_sensor_image_first(self, gmap):
        drone, ground = self._agents(gmap)
        _, img = ground.start()
        with pytest.raises(ProtocolError):
            drone.handle(img)

    def test_double_localization(self, gmap):
        drone, ground = self._agents(gmap)
        loc, _ = ground.start()
        drone.handle(loc)
        with pytest.raises(ProtocolError):
            drone.handle(loc)

    def test_drone_rejects_segmented(self, gmap):
        drone, _ = self._agents(gmap)
        with pytest.raises(ProtocolError):
            drone.handle(image_message(Raster(np.zeros((4, 4))), Tag.SEGMENTED_IMAGE))

    def test_ground_out_of_order(self, gmap):
        _, ground = self._agents(gmap)
        seg = image_message(Raster(np.ones((256, 256))), Tag.SEGMENTED_IMAGE)
        with pytest.raises(ProtocolError):
            ground.handle(seg)
        ground.start()
        with pytest.raises(ProtocolError):
            ground.handle(localization_message(0, 0))
        ground.handle(seg)
        with pytest.raises(ProtocolError):
            ground.handle(seg)
        with pytest.raises(ProtocolError):
            ground.start()

    def test_ground_feasible_extremes(self, gmap):
        for value in (1.0, 0.0):
            _, ground = self._agents(gmap)
            ground.start()
            ground.handle(image_message(Raster(np.full((256, 256), value)), Tag.SEGMENTED_IMAGE))
            assert np.all(np.asarray(ground.feasible) == value)

    def test_localization_outside_map(self, gmap):
        drone, _ = self._agents(gmap)
        with pytest.raises(NoTileError):
            drone.handle(localization_message(-100.0, -100.0))

    def test_toy_segmentation_path(self, gmap):
        tile = gmap.tiles[1]
        drone = DroneAgent(gmap, use_precomputed_segmentation=False)
        ground = GroundAgent(tile.image, gmap.tile_center(tile))
        loc, img = ground.start()
        drone.handle(loc)
        (reply,) = drone.handle(img)
        ground.handle(reply)
        agree = (np.asarray(ground.feasible) == np.asarray(tile.segmentation)).mean()
        assert agree > 0.95


class TestEpisodes:
    def test_improvement_arithmetic(self):
        assert improvement(89.41, 5.30) == pytest.approx(1 - 5.30 / 89.41)
        assert 100 * improvement(89.41, 5.30) == pytest.approx(94.07, abs=0.01)
        assert improvement(0.3, 0.1) == 0.0
        assert improvement(10.0, 20.0) == -1.0

    def test_zero_noise_episode(self, gmap):
        scen = Scenario(gmap, 2, Sim2(1.0, 0.2, 3, -4), image_noise=0.0)
        rep = run_episode(scen, GpsNoiseModel())
        assert rep.ok
        assert rep.initial_rot_error == pytest.approx(0.0, abs=1e-9)
        assert rep.refined_rot_error <= rep.initial_rot_error + 1.0
        assert rep.improvement == 0.0
        assert rep.trace == [1, 2, 3]

    def test_large_heading_noise_refined(self, gmap):
        scen = Scenario(gmap, 1, Sim2(1.05, math.radians(40), 2, 5), image_noise=0.05, seed=3)
        noise = GpsNoiseModel(2.0, math.radians(90), 0.03, seed=4)
        rep = run_episode(scen, noise)
        assert rep.ok and rep.refined_rot_error < 3.0
        assert rep.refined_rot_error < rep.initial_rot_error or rep.initial_rot_error < 3.0
        fr = np.asarray(rep.feasible_region)
        truth = np.asarray(gmap.tiles[1].segmentation)
        assert fr.any() and fr.shape == truth.shape

    def test_fallback_on_no_evidence(self, gmap):
        # a flat ground view carries no registration evidence: keep the GPS value
        tile = gmap.tiles[0]
        drone = DroneAgent(gmap, heading_prior=0.4)
        ground = GroundAgent(Raster(np.full((256, 256), 0.5)), gmap.tile_center(tile))
        loc, img = ground.start()
        drone.handle(loc)
        drone.handle(img)
        assert drone.fell_back and drone.refined == drone.initial

    def test_abort_reports_diagnostic(self, gmap):
        scen = Scenario(gmap, 0, Sim2(1.0, 0.0, 0, 0))
        rep = run_episode(scen, GpsNoiseModel(position_sigma=1e6, seed=1))
        assert not rep.ok and rep.error.startswith("NoTileError")

    def test_episode_determinism(self):
        spec = ScenarioSpec.from_settings({"episodes": "3", "seed": "5"})
        a, b = spec.run(), spec.run()
        assert [r.digest() for r in a] == [r.digest() for r in b]
        assert len({r.digest() for r in a}) == 3

    def test_refinement_dominance_small(self):
        spec = ScenarioSpec.from_settings({"episodes": "12", "seed": "3"})
        reps = spec.run()
        init = [r.initial_rot_error for r in reps]
        ref = [r.refined_rot_error for r in reps]
        for q in (25, 50, 75):
            assert np.percentile(ref, q) < np.percentile(init, q)

    def test_report_summary(self):
        rep = EpisodeReport(initial_rot_error=10.0, refined_rot_error=1.0, improvement=0.9)
        s = rep.summary()
        assert s["improvement"] == 0.9 and "latencies" not in s


class TestScenarioFiles:
    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ScenarioSpec.from_settings({"speed": "3"})

    def test_fixed_pose(self):
        spec = ScenarioSpec.from_settings(
            {"tile": "3", "pose_theta_deg": "25", "pose_scale": "1.1", "pose_tx": "2", "pose_ty": "-1"}
        )
        scen = spec.scenario(0)
        assert scen.tile_index == 3
        assert scen.true_pose.is_close(Sim2(1.1, math.radians(25), 2, -1))

    def test_map_from_pgm(self, tmp_path):
        from aeroground.io import pgm

        img, mask = synthetic_scene(256, 128, seed=4)
        pgm.write(tmp_path / "map.pgm", Raster(img))
        pgm.write(tmp_path / "mask.pgm", Raster(mask.astype(float)))
        (tmp_path / "scen.txt").write_text("map=map.pgm\nmask=mask.pgm\ntile_grid=2x1\ntile_size=128\n")
        spec = ScenarioSpec.load(tmp_path / "scen.txt")
        assert len(spec.global_map.tiles) == 2
        assert np.array_equal(np.asarray(spec.global_map.tiles[1].segmentation), mask[:, 128:].astype(float))

    def test_map_size_mismatch(self, tmp_path):
        from aeroground.io import pgm

        pgm.write(tmp_path / "map.pgm", Raster(np.zeros((100, 100))))
        with pytest.raises(ValueError):
            ScenarioSpec.from_settings({"map": "map.pgm"}, tmp_path)
