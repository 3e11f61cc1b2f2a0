"""Range-image projection, collision handling, and label un-projection."""

import math

import numpy as np
import pytest

from sgpkit.errors import ConfigError, ContractError, InvariantError
from sgpkit.kitti_io import RawScan, SegmentMap
from sgpkit.rangeview import (
    FovSpec,
    RangeImage,
    label_scan,
    lift_labels,
    spherical_project,
)

LABELS = {0: "background", 1: "car"}


def symmetric_fov(height=64, width=2048):
    return FovSpec.from_degrees(25.0, -25.0, height, width)


def make_scan(xyz, intensity=None):
    xyz = np.asarray(xyz, dtype=np.float64)
    if intensity is None:
        intensity = np.zeros(len(xyz))
    return RawScan(xyz, intensity)


class TestFovSpec:
    def test_default(self):
        fov = FovSpec.default()
        assert (fov.height, fov.width) == (64, 2048)
        assert fov.fov_up == pytest.approx(math.radians(3.0))
        assert fov.fov_down == pytest.approx(math.radians(-25.0))

    def test_inverted_fov_rejected(self):
        with pytest.raises(InvariantError, match="exceed"):
            FovSpec.from_degrees(-10.0, 10.0)

    def test_degenerate_grid_rejected(self):
        with pytest.raises(InvariantError, match="1×1"):
            FovSpec.from_degrees(3.0, -25.0, 0, 2048)


class TestSphericalProject:
    def test_empty_scan(self):
        img = spherical_project(make_scan(np.zeros((0, 3))), symmetric_fov())
        assert img.valid_count == 0
        assert not img.valid.any()
        assert (img.source_index == -1).all()
        assert img.skipped == 0

    def test_single_point_hand_case(self):
        # (1, 0, 0): yaw 0, pitch 0. With a symmetric fov the point lands
        # at u = floor(0.5 * 2048) = 1024, v = floor(0.5 * 64) = 32.
        img = spherical_project(make_scan([[1.0, 0.0, 0.0]]), symmetric_fov())
        assert img.valid_count == 1
        assert img.valid[32, 1024]
        assert img.r[32, 1024] == 1.0
        assert img.source_index[32, 1024] == 0

    def test_same_ray_nearer_wins(self):
        img = spherical_project(make_scan([[10.0, 0.0, 0.0], [5.0, 0.0, 0.0]]),
                                symmetric_fov())
        assert img.valid_count == 1
        assert img.r[32, 1024] == 5.0
        assert img.source_index[32, 1024] == 1
        np.testing.assert_array_equal(img.xyz[32, 1024], [5.0, 0.0, 0.0])

    def test_range_floor_skips(self):
        img = spherical_project(make_scan([[0.3, 0.0, 0.0], [5.0, 0.0, 0.0]]),
                                symmetric_fov(), range_floor=0.5)
        assert img.skipped == 1
        assert img.valid_count == 1
        assert img.r[32, 1024] == 5.0

    def test_valid_pixels_carry_exact_coordinates(self):
        rng = np.random.default_rng(31)
        scan = make_scan(rng.uniform(-40, 40, (5000, 3)), rng.random(5000))
        img = spherical_project(scan, symmetric_fov())
        src = img.source_index[img.valid]
        np.testing.assert_array_equal(img.xyz[img.valid], scan.xyz[src])
        np.testing.assert_array_equal(img.intensity[img.valid], scan.intensity[src])
        np.testing.assert_array_equal(img.r[img.valid],
                                      np.linalg.norm(scan.xyz[src], axis=1))

    def test_extreme_points_stay_in_bounds(self):
        # straight up, straight down, and the yaw seam all clamp into the grid
        pts = [[0.0, 0.0, 9.0], [0.0, 0.0, -9.0], [-50.0, 0.0, 0.0],
               [-50.0, -1e-9, 0.0], [1e6, 1e6, -1e6]]
        img = spherical_project(make_scan(pts), symmetric_fov(8, 16))
        assert img.valid_count >= 1   # collisions may merge them, never drop out of bounds
        assert img.valid_count + img.skipped <= len(pts)

    def test_order_independent(self):
        rng = np.random.default_rng(37)
        scan = make_scan(rng.uniform(-30, 30, (4000, 3)), rng.random(4000))
        perm = rng.permutation(4000)
        shuffled = make_scan(scan.xyz[perm], scan.intensity[perm])
        a = spherical_project(scan, symmetric_fov())
        b = spherical_project(shuffled, symmetric_fov())
        np.testing.assert_array_equal(a.valid, b.valid)
        np.testing.assert_array_equal(a.r, b.r)
        np.testing.assert_array_equal(a.xyz, b.xyz)
        np.testing.assert_array_equal(a.intensity, b.intensity)
        assert a.skipped == b.skipped
        # source indices refer to different orderings but the same points
        np.testing.assert_array_equal(perm[b.source_index[b.valid]],
                                      a.source_index[a.valid])

    def test_valid_count_bounded(self):
        rng = np.random.default_rng(41)
        fov = symmetric_fov(4, 8)
        scan = make_scan(rng.uniform(-30, 30, (500, 3)))
        img = spherical_project(scan, fov)
        assert img.valid_count <= min(500, 4 * 8)

    def test_to_depth_map(self):
        img = spherical_project(make_scan([[5.0, 0.0, 0.0]]), symmetric_fov(8, 16))
        dm = img.to_depth_map()
        np.testing.assert_array_equal(dm.valid, img.valid)
        assert dm.depth[img.valid][0] == 5.0


class TestRangeImageInvariants:
    def test_mask_mismatch_rejected(self):
        fov = symmetric_fov(2, 2)
        r = np.zeros((2, 2))
        r[0, 0] = 1.0
        xyz = np.zeros((2, 2, 3))
        xyz[0, 0] = [1.0, 0.0, 0.0]
        valid = np.zeros((2, 2), dtype=bool)   # should be True at (0,0)
        src = np.full((2, 2), -1, dtype=np.int64)
        src[0, 0] = 0
        with pytest.raises(InvariantError, match="source_index|range"):
            RangeImage(r, xyz, np.zeros((2, 2)), valid, src, fov)

    def test_range_norm_mismatch_rejected(self):
        fov = symmetric_fov(1, 1)
        xyz = np.array([[[3.0, 0.0, 0.0]]])
        with pytest.raises(InvariantError, match="1e-6"):
            RangeImage(np.array([[2.0]]), xyz, np.zeros((1, 1)),
                       np.array([[True]]), np.array([[0]]), fov)


class TestLiftLabels:
    def test_all_background(self):
        fov = symmetric_fov(8, 16)
        scan = make_scan([[5.0, 0.0, 0.0], [3.0, 2.0, 1.0]])
        img = spherical_project(scan, fov)
        labels = SegmentMap(np.zeros((8, 16), dtype=np.uint8), LABELS)
        cloud = lift_labels(labels, img, scan)
        assert len(cloud) == 2
        assert (cloud.class_id == 0).all()
        assert not cloud.pseudo.any()

    def test_single_point_inherits_pixel_class(self):
        fov = symmetric_fov()
        scan = make_scan([[1.0, 0.0, 0.0]])
        img = spherical_project(scan, fov)
        raster = np.zeros((64, 2048), dtype=np.uint8)
        raster[32, 1024] = 1
        cloud = lift_labels(SegmentMap(raster, LABELS), img, scan)
        assert cloud.class_id[0] == 1

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(43)
        fov = symmetric_fov(16, 64)
        scan = make_scan(rng.uniform(-30, 30, (10_000, 3)))
        img = spherical_project(scan, fov)
        raster = np.indices((16, 64)).sum(axis=0).astype(np.uint8) % 2
        labels = SegmentMap(raster, {0: "background", 1: "car"})
        cloud = lift_labels(labels, img, scan)

        span = fov.fov_up - fov.fov_down
        for i in range(0, 10_000, 97):
            x, y, z = scan.xyz[i]
            r = math.sqrt(x * x + y * y + z * z)
            yaw = math.atan2(y, x)
            pitch = math.asin(z / r)
            u = min(max(int(math.floor((0.5 * (1 - yaw / math.pi)) * 64)), 0), 63)
            v = min(max(int(math.floor((1 - (pitch - fov.fov_down) / span) * 16)), 0), 15)
            assert cloud.class_id[i] == raster[v, u]

    def test_occluded_points_inherit_winner_pixel_label(self):
        fov = symmetric_fov()
        scan = make_scan([[5.0, 0.0, 0.0], [50.0, 0.0, 0.0]])
        img = spherical_project(scan, fov)
        raster = np.zeros((64, 2048), dtype=np.uint8)
        raster[32, 1024] = 1
        cloud = lift_labels(SegmentMap(raster, LABELS), img, scan)
        np.testing.assert_array_equal(cloud.class_id, [1, 1])

    def test_depth_gate_reassigns_far_points(self):
        fov = symmetric_fov()
        scan = make_scan([[5.0, 0.0, 0.0], [50.0, 0.0, 0.0]])
        img = spherical_project(scan, fov)
        raster = np.zeros((64, 2048), dtype=np.uint8)
        raster[32, 1024] = 1
        cloud = lift_labels(SegmentMap(raster, LABELS), img, scan,
                            depth_gate=True, depth_tolerance=0.5)
        np.testing.assert_array_equal(cloud.class_id, [1, 0])

    def test_depth_gate_fallback_must_resolve(self):
        fov = symmetric_fov(8, 16)
        scan = make_scan([[5.0, 0.0, 0.0]])
        img = spherical_project(scan, fov)
        labels = SegmentMap(np.ones((8, 16), dtype=np.uint8), {1: "car"})
        with pytest.raises(ConfigError, match="fallback"):
            lift_labels(labels, img, scan, depth_gate=True, fallback_class=0)

    def test_dimension_mismatch_rejected(self):
        fov = symmetric_fov(8, 16)
        scan = make_scan([[5.0, 0.0, 0.0]])
        img = spherical_project(scan, fov)
        labels = SegmentMap(np.zeros((4, 16), dtype=np.uint8), LABELS)
        with pytest.raises(ContractError, match="does not match"):
            lift_labels(labels, img, scan)


class TestLabelScan:
    def test_constant_labels(self):
        scan = make_scan([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], [0.1, 0.9])
        cloud = label_scan(scan, LABELS)
        assert (cloud.class_id == 0).all()
        assert not cloud.pseudo.any()
        np.testing.assert_array_equal(cloud.intensity, scan.intensity)

    def test_unknown_class_rejected(self):
        with pytest.raises(ConfigError, match="missing"):
            label_scan(make_scan([[1.0, 0.0, 0.0]]), LABELS, class_id=9)
