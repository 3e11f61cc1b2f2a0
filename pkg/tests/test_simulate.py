"""Analytic raycasting, surface distances, silhouettes, and scene files."""

import numpy as np
import pytest

from sgpkit.errors import ConfigError, ContractError, InvariantError
from sgpkit.geometry import CalibrationSet, backproject_pixels
from sgpkit.rangeview import FovSpec, spherical_project
from sgpkit.simulate import (
    Box,
    GroundTruthFrame,
    Plane,
    Scene,
    Sphere,
    default_camera_calib,
    find_silhouette,
    inject_long_tail,
    make_random_scene,
    raycast_camera,
    raycast_lidar,
    read_scene_file,
    render_frame,
    scene_from_dict,
    scene_to_dict,
    surface_distance,
    write_scene_file,
)

LABELS = {0: "background", 1: "car", 2: "pedestrian", 3: "cyclist", 10: "road"}


def centered_calib(fx=100.0, cx=31.0, cy=15.0):
    """Zero-translation camera: optical axis exactly along LiDAR +x."""
    p2 = np.array([
        [fx, 0.0, cx, 0.0],
        [0.0, fx, cy, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    tr = np.array([
        [0.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return CalibrationSet(p2, np.eye(3), tr)


def small_scene(primitives, width=63, height=31):
    return Scene(primitives, LABELS, centered_calib(), image_width=width,
                 image_height=height)


class TestPrimitives:
    def test_degenerate_rejected(self):
        with pytest.raises(InvariantError, match="extents"):
            Box((0, 0, 0), (1.0, 0.0, 1.0), 1)
        with pytest.raises(InvariantError, match="radius"):
            Sphere((0, 0, 0), -0.5, 1)
        with pytest.raises(InvariantError, match="axis"):
            Plane("w", 0.0, 1)
        with pytest.raises(InvariantError, match="class id"):
            Sphere((0, 0, 0), 1.0, 300)

    def test_box_intersection_hand_case(self):
        box = Box((10.0, 0.0, 0.0), (2.0, 2.0, 2.0), 1)
        t = box.intersect(np.zeros((1, 3)), np.array([[1.0, 0.0, 0.0]]))
        assert t[0] == pytest.approx(9.0)

    def test_box_miss_parallel_ray(self):
        box = Box((10.0, 0.0, 0.0), (2.0, 2.0, 2.0), 1)
        t = box.intersect(np.array([[0.0, 5.0, 0.0]]), np.array([[1.0, 0.0, 0.0]]))
        assert np.isinf(t[0])

    def test_box_origin_inside_hits_exit(self):
        box = Box((0.0, 0.0, 0.0), (4.0, 4.0, 4.0), 1)
        t = box.intersect(np.zeros((1, 3)), np.array([[1.0, 0.0, 0.0]]))
        assert t[0] == pytest.approx(2.0)

    def test_sphere_intersection_both_roots(self):
        sphere = Sphere((10.0, 0.0, 0.0), 1.0, 1)
        t = sphere.intersect(np.zeros((1, 3)), np.array([[1.0, 0.0, 0.0]]))
        assert t[0] == pytest.approx(9.0)
        inside = sphere.intersect(np.array([[10.0, 0.0, 0.0]]),
                                  np.array([[1.0, 0.0, 0.0]]))
        assert inside[0] == pytest.approx(1.0)

    def test_sphere_tangent_grazing(self):
        sphere = Sphere((10.0, 1.0, 0.0), 1.0, 1)
        t = sphere.intersect(np.zeros((1, 3)), np.array([[1.0, 0.0, 0.0]]))
        assert t[0] == pytest.approx(10.0)

    def test_plane_behind_ray_misses(self):
        plane = Plane("x", -5.0, 1)
        t = plane.intersect(np.zeros((1, 3)), np.array([[1.0, 0.0, 0.0]]))
        assert np.isinf(t[0])

    def test_plane_axis_names(self):
        assert Plane("z", -1.7, 1).axis == 2
        assert Plane(1, 0.0, 1).axis == 1


class TestSurfaceDistance:
    def test_point_on_sphere_surface(self):
        scene = small_scene([Sphere((5.0, 0.0, 0.0), 2.0, 1)])
        assert surface_distance([7.0, 0.0, 0.0], scene) == pytest.approx(0.0)

    def test_box_face_offset(self):
        scene = small_scene([Box((10.0, 0.0, 0.0), (2.0, 2.0, 2.0), 1)])
        assert surface_distance([8.8, 0.0, 0.0], scene) == pytest.approx(0.2)

    def test_inside_box(self):
        scene = small_scene([Box((0.0, 0.0, 0.0), (2.0, 2.0, 2.0), 1)])
        assert surface_distance([0.3, 0.0, 0.0], scene) == pytest.approx(0.7)

    def test_box_corner_region(self):
        scene = small_scene([Box((0.0, 0.0, 0.0), (2.0, 2.0, 2.0), 1)])
        # nearest feature is the corner (1,1,1)
        assert surface_distance([2.0, 2.0, 2.0], scene) == pytest.approx(np.sqrt(3.0))

    def test_plane_distance(self):
        scene = small_scene([Plane("z", -1.7, 10)])
        assert surface_distance([3.0, 4.0, 0.3], scene) == pytest.approx(2.0)

    def test_min_over_primitives(self):
        scene = small_scene([Sphere((5.0, 0.0, 0.0), 1.0, 1),
                             Plane("z", -10.0, 10)])
        assert surface_distance([5.0, 0.0, 2.0], scene) == pytest.approx(1.0)

    def test_empty_scene_infinite(self):
        scene = small_scene([])
        assert surface_distance([0.0, 0.0, 0.0], scene) == np.inf

    def test_closed_form_vs_sampling(self):
        rng = np.random.default_rng(7)
        box = Box((2.0, -1.0, 0.5), (1.4, 2.2, 0.8), 1)
        sphere = Sphere((-3.0, 2.0, -1.0), 1.3, 2)
        scene = small_scene([box, sphere])

        def sampled_surface(n):
            u = rng.random((n, 2))
            # box: pick a face, then a point on it
            face = rng.integers(0, 6, n)
            axis = face % 3
            side = np.where(face < 3, 1.0, -1.0)
            pts_box = np.empty((n, 3))
            others = np.array([[1, 2], [0, 2], [0, 1]])
            for i in range(n):
                a = axis[i]
                pts_box[i, a] = box.center[a] + side[i] * box.half[a]
                o1, o2 = others[a]
                pts_box[i, o1] = box.center[o1] + (u[i, 0] - 0.5) * box.size[o1]
                pts_box[i, o2] = box.center[o2] + (u[i, 1] - 0.5) * box.size[o2]
            dirs = rng.normal(size=(n, 3))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            pts_sphere = sphere.center + dirs * sphere.radius
            return np.concatenate([pts_box, pts_sphere])

        queries = rng.uniform(-6, 6, (200, 3))
        closed = surface_distance(queries, scene)
        gaps = []
        for n in (500, 5000):
            samples = sampled_surface(n)
            approx = np.min(np.linalg.norm(queries[:, None, :] - samples[None, :, :],
                                           axis=2), axis=1)
            assert (closed <= approx + 1e-9).all()
            gaps.append(np.max(approx - closed))
        assert gaps[1] <= gaps[0]
        assert gaps[1] < 0.2


class TestRaycastCamera:
    def test_facing_plane_constant_depth(self):
        scene = small_scene([Plane("x", 10.0, 1)])
        depth, segments, _, _ = raycast_camera(scene)
        assert depth.valid.all()
        np.testing.assert_allclose(depth.depth, 10.0, atol=1e-9)
        assert (segments.class_id == 1).all()

    def test_sphere_principal_pixel_depth(self):
        scene = small_scene([Sphere((12.0, 0.0, 0.0), 2.0, 2)])
        depth, segments, _, _ = raycast_camera(scene)
        # principal point (cx=31, cy=15) looks straight down the axis
        assert depth.depth[15, 31] == pytest.approx(10.0)
        assert segments.class_id[15, 31] == 2

    def test_empty_scene_all_invalid(self):
        scene = small_scene([])
        depth, segments, _, prim = raycast_camera(scene)
        assert not depth.valid.any()
        assert (segments.class_id == 0).all()
        assert (prim == -1).all()

    def test_consistency_triangle(self):
        scene = make_random_scene(3)
        depth, _, hit_points, _ = raycast_camera(scene)
        v, u = np.nonzero(depth.valid)
        uvz = np.column_stack([u.astype(float), v.astype(float), depth.depth[v, u]])
        back = backproject_pixels(uvz, scene.calib)
        err = np.abs(back - hit_points[v, u]).max()
        assert err < 1e-6

    def test_nearest_primitive_wins(self):
        scene = small_scene([Plane("x", 20.0, 10), Box((10.0, 0.0, 0.0),
                                                       (2.0, 4.0, 4.0), 1)])
        depth, segments, _, _ = raycast_camera(scene)
        assert segments.class_id[15, 31] == 1
        assert depth.depth[15, 31] == pytest.approx(9.0)

    def test_deterministic(self):
        a = raycast_camera(make_random_scene(11))
        b = raycast_camera(make_random_scene(11))
        np.testing.assert_array_equal(a[0].depth, b[0].depth)
        np.testing.assert_array_equal(a[1].class_id, b[1].class_id)
        np.testing.assert_array_equal(a[2], b[2])


class TestRaycastLidar:
    def test_empty_scene(self):
        assert len(raycast_lidar(small_scene([]), FovSpec.default())) == 0

    def test_facing_plane_returns_x(self):
        scene = small_scene([Plane("x", 10.0, 1)])
        scan = raycast_lidar(scene, FovSpec.from_degrees(3.0, -25.0, 16, 128))
        assert len(scan) == 16 * 64   # exactly the forward hemisphere
        np.testing.assert_allclose(scan.xyz[:, 0], 10.0, atol=1e-9)
        assert (scan.intensity == 0.5).all()

    def test_projection_consistency(self):
        fov = FovSpec.default()
        scene = make_random_scene(5)
        scan = raycast_lidar(scene, fov)
        img = spherical_project(scan, fov)
        # every emitted point projects back into its own generating cell
        assert img.valid_count == len(scan)
        np.testing.assert_array_equal(img.xyz[img.valid], scan.xyz)
        np.testing.assert_array_equal(img.source_index[img.valid],
                                      np.arange(len(scan)))


class TestRenderFrame:
    def test_frame_invariants_hold(self):
        frame = render_frame(make_random_scene(7))
        assert frame.depth.valid.all()   # background planes cover the image
        assert 0.0 < frame.foreground_ratio({1, 2, 3}) < 0.5
        assert frame.foreground_ratio({1, 2, 3, 10, 11}) == 1.0
        assert len(frame.scan) > 1000

    def test_segment_handle_disagreement_rejected(self):
        scene = make_random_scene(9)
        depth, segments, hit_points, hit_prim = raycast_camera(scene)
        tampered = segments.class_id.copy()
        v, u = np.nonzero(depth.valid)
        tampered[v[0], u[0]] = 3 if tampered[v[0], u[0]] != 3 else 1
        from sgpkit.kitti_io import SegmentMap

        bad = SegmentMap(tampered, segments.label_names)
        scan = raycast_lidar(scene)
        with pytest.raises(InvariantError, match="disagree"):
            GroundTruthFrame(scan, depth, bad, hit_points, hit_prim, scene,
                             FovSpec.default())

    def test_background_class_required(self):
        with pytest.raises(InvariantError, match="background"):
            Scene([Box((5, 0, 0), (1, 1, 1), 1)], {1: "car"})

    def test_unresolvable_primitive_class_rejected(self):
        with pytest.raises(InvariantError, match=r"\[7\]"):
            Scene([Box((5, 0, 0), (1, 1, 1), 7)], {0: "background"})


class TestFindSilhouette:
    def test_block_boundary(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[1:4, 1:4] = True
        sil = find_silhouette(mask)
        assert len(sil) == 8   # ring around the single interior pixel
        assert not any((r, c) == (2, 2) for r, c in sil)

    def test_border_pixels_count(self):
        mask = np.ones((3, 3), dtype=bool)
        assert len(find_silhouette(mask)) == 8

    def test_empty_mask(self):
        assert len(find_silhouette(np.zeros((4, 4), dtype=bool))) == 0


class TestInjectLongTail:
    def make_inputs(self):
        scene = small_scene([Box((10.0, 0.0, 0.0), (0.2, 2.0, 2.0), 1)])
        depth, segments, _, _ = raycast_camera(scene)
        from sgpkit.sgp import ClassWhitelist, sgp_generate

        pseudo, _ = sgp_generate(depth, segments, ClassWhitelist([1], LABELS),
                                 scene.calib)
        return scene, depth, segments, pseudo

    def test_injected_points_stand_off_surface(self):
        scene, depth, segments, pseudo = self.make_inputs()
        pixels = find_silhouette(segments.class_id == 1)
        cloud, injected = inject_long_tail(pseudo, depth, segments, pixels, 1.0,
                                           scene.calib)
        assert len(injected) == len(pixels)
        dists = surface_distance(cloud.xyz[injected], scene)
        assert (dists > 0.4).all()

    def test_zero_pixels_identity(self):
        scene, depth, segments, pseudo = self.make_inputs()
        cloud, injected = inject_long_tail(pseudo, depth, segments,
                                           np.empty((0, 2)), 1.0, scene.calib)
        assert len(injected) == 0
        np.testing.assert_array_equal(cloud.xyz, pseudo.xyz)

    def test_count_matches_request(self):
        scene, depth, segments, pseudo = self.make_inputs()
        pixels = find_silhouette(segments.class_id == 1)[:5]
        cloud, injected = inject_long_tail(pseudo, depth, segments, pixels, 1.0,
                                           scene.calib)
        assert len(cloud) == len(pseudo) + 5
        assert list(injected) == list(range(len(pseudo), len(pseudo) + 5))

    def test_nonpositive_offset_rejected(self):
        scene, depth, segments, pseudo = self.make_inputs()
        with pytest.raises(ContractError, match="offset"):
            inject_long_tail(pseudo, depth, segments, np.array([[15, 31]]), 0.0,
                             scene.calib)

    def test_invalid_pixel_rejected(self):
        scene, depth, segments, pseudo = self.make_inputs()
        bad = np.array([[0, 0]])   # corner pixel misses the box
        assert not depth.valid[0, 0]
        with pytest.raises(ContractError, match="no valid depth"):
            inject_long_tail(pseudo, depth, segments, bad, 1.0, scene.calib)


class TestSceneFiles:
    def test_round_trip(self, tmp_path):
        scene = make_random_scene(13)
        f = tmp_path / "scene.yaml"
        write_scene_file(f, scene)
        back = read_scene_file(f)
        assert len(back.primitives) == len(scene.primitives)
        assert back.label_names == scene.label_names
        assert back.calib.fx == scene.calib.fx
        a = raycast_lidar(scene)
        b = raycast_lidar(back)
        np.testing.assert_allclose(a.xyz, b.xyz, atol=1e-12)

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="'weather'"):
            scene_from_dict({"labels": {0: "background"}, "primitives": [],
                             "weather": "rain"})

    def test_unknown_camera_key(self):
        with pytest.raises(ConfigError, match="'zoom'"):
            scene_from_dict({"camera": {"zoom": 2}, "labels": {0: "background"},
                             "primitives": []})

    def test_unknown_primitive_key(self):
        with pytest.raises(ConfigError, match="'color'"):
            scene_from_dict({"labels": {0: "background"},
                             "primitives": [{"type": "sphere", "center": [5, 0, 0],
                                             "radius": 1.0, "class": 0,
                                             "color": "red"}]})

    def test_bad_primitive_type(self):
        with pytest.raises(ConfigError, match="cone"):
            scene_from_dict({"labels": {0: "background"},
                             "primitives": [{"type": "cone"}]})

    def test_missing_primitive_key(self):
        with pytest.raises(ConfigError, match="radius"):
            scene_from_dict({"labels": {0: "background"},
                             "primitives": [{"type": "sphere", "center": [5, 0, 0],
                                             "class": 0}]})

    def test_missing_background_label(self):
        with pytest.raises(ConfigError, match="background"):
            scene_from_dict({"labels": {1: "car"}, "primitives": []})

    def test_not_yaml(self, tmp_path):
        f = tmp_path / "scene.yaml"
        f.write_text("primitives: [unclosed")
        with pytest.raises(ConfigError, match="YAML"):
            read_scene_file(f)

    def test_dict_shape(self):
        d = scene_to_dict(make_random_scene(1))
        assert set(d) == {"camera", "labels", "primitives"}
        assert d["camera"]["width"] == 1242


class TestMakeRandomScene:
    def test_deterministic(self):
        a = scene_to_dict(make_random_scene(21))
        b = scene_to_dict(make_random_scene(21))
        assert a == b

    def test_background_toggle(self):
        with_bg = make_random_scene(23, with_background=True)
        without = make_random_scene(23, with_background=False)
        assert len(with_bg.primitives) == len(without.primitives) + 2

    def test_objects_inside_lidar_fov(self):
        # every object surface must be reachable by the default LiDAR
        fov = FovSpec.default()
        for seed in range(8):
            scene = make_random_scene(seed, with_background=False)
            scan = raycast_lidar(scene, fov)
            for i, prim in enumerate(scene.primitives):
                hits = surface_distance(scan.xyz, small_scene([prim])) < 1e-6
                assert hits.any(), f"seed {seed}: primitive {i} unseen by LiDAR"
