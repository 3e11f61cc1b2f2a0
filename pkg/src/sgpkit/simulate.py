"""Analytic scene simulator: ground-truth frames for the whole pipeline.

Scenes are unions of axis-aligned boxes, spheres, and axis-aligned planes,
each carrying a class id.  Two virtual sensors render them:

  * a camera that casts one ray per pixel through the calibration chain
    and records the homogeneous depth of the nearest hit, and
  * a LiDAR that casts one ray per cell of the spherical grid from the
    origin and emits a point per hit.

Intersections and surface distances are closed-form, so every downstream
tolerance can be checked against exact geometry.  Camera rays are built by
evaluating the back-projection at two depths: the ray through pixel (u, v)
is b(t) = A + B t with b affine in the homogeneous depth t, which makes
"back-project the rendered depth" land exactly on the recorded hit point.
Everything here is pure and deterministic: the same scene renders the same
frame bit for bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, ContractError, InvariantError
from .geometry import CalibrationSet, backproject_pixels
from .kitti_io import DepthMap, LabeledPointCloud, RawScan, SegmentMap
from .rangeview import FovSpec

# Hits nearer than this are the sensor itself; rays start just past it.
RAY_FLOOR = 1e-6

BACKGROUND_CLASS = 0

DEFAULT_SCENE_LABELS = {
    0: "background",
    1: "car",
    2: "pedestrian",
    3: "cyclist",
    10: "road",
    11: "building",
}

_AXIS_BY_NAME = {"x": 0, "y": 1, "z": 2}


def _check_class_id(class_id: int) -> int:
    class_id = int(class_id)
    if not 0 <= class_id <= 255:
        raise InvariantError(f"class id {class_id} outside [0, 255]")
    return class_id


class Box:
    """Axis-aligned box given by center and full extents."""

    def __init__(self, center, size, class_id: int):
        self.center = np.asarray(center, dtype=np.float64)
        self.size = np.asarray(size, dtype=np.float64)
        if self.center.shape != (3,) or self.size.shape != (3,):
            raise InvariantError("Box: center and size must be 3-vectors")
        if not (np.all(np.isfinite(self.center)) and np.all(np.isfinite(self.size))):
            raise InvariantError("Box: center and size must be finite")
        if not np.all(self.size > 0):
            raise InvariantError(f"Box: extents must be positive, got {self.size.tolist()}")
        self.half = self.size / 2.0
        self.class_id = _check_class_id(class_id)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray,
                  t_floor: float = RAY_FLOOR) -> np.ndarray:
        lo = self.center - self.half
        hi = self.center + self.half
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - origins) / dirs
            t2 = (hi - origins) / dirs
        # fmin/fmax drop the NaN produced by 0/0 when a ray starts exactly
        # on a slab boundary with zero direction along that axis
        near = np.fmin(t1, t2)
        far = np.fmax(t1, t2)
        tmin = near.max(axis=1)
        tmax = far.min(axis=1)
        t = np.where(tmin > t_floor, tmin, tmax)
        hit = (tmax >= tmin) & (t > t_floor) & np.isfinite(t)
        return np.where(hit, t, np.inf)

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        q = np.abs(points - self.center) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return np.abs(outside + inside)

    def __repr__(self) -> str:
        return f"Box(center={self.center.tolist()}, size={self.size.tolist()}, class={self.class_id})"


class Sphere:
    def __init__(self, center, radius: float, class_id: int):
        self.center = np.asarray(center, dtype=np.float64)
        if self.center.shape != (3,) or not np.all(np.isfinite(self.center)):
            raise InvariantError("Sphere: center must be a finite 3-vector")
        if not (np.isfinite(radius) and radius > 0):
            raise InvariantError(f"Sphere: radius must be positive, got {radius}")
        self.radius = float(radius)
        self.class_id = _check_class_id(class_id)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray,
                  t_floor: float = RAY_FLOOR) -> np.ndarray:
        oc = origins - self.center
        a = (dirs * dirs).sum(axis=1)
        b = 2.0 * (dirs * oc).sum(axis=1)
        c = (oc * oc).sum(axis=1) - self.radius * self.radius
        disc = b * b - 4.0 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t_near = (-b - sq) / (2.0 * a)
        t_far = (-b + sq) / (2.0 * a)
        t = np.where(t_near > t_floor, t_near, t_far)
        hit = (disc >= 0.0) & (t > t_floor)
        return np.where(hit, t, np.inf)

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(np.linalg.norm(points - self.center, axis=-1) - self.radius)

    def __repr__(self) -> str:
        return f"Sphere(center={self.center.tolist()}, r={self.radius}, class={self.class_id})"


class Plane:
    """Infinite plane normal to one coordinate axis: x[axis] = offset."""

    def __init__(self, axis, offset: float, class_id: int):
        if isinstance(axis, str):
            if axis not in _AXIS_BY_NAME:
                raise InvariantError(f"Plane: axis must be x, y, or z, got {axis!r}")
            axis = _AXIS_BY_NAME[axis]
        if axis not in (0, 1, 2):
            raise InvariantError(f"Plane: axis must be 0, 1, or 2, got {axis}")
        if not np.isfinite(offset):
            raise InvariantError("Plane: offset must be finite")
        self.axis = int(axis)
        self.offset = float(offset)
        self.class_id = _check_class_id(class_id)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray,
                  t_floor: float = RAY_FLOOR) -> np.ndarray:
        d = dirs[:, self.axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offset - origins[:, self.axis]) / d
        hit = (d != 0.0) & (t > t_floor) & np.isfinite(t)
        return np.where(hit, t, np.inf)

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points[..., self.axis] - self.offset)

    def __repr__(self) -> str:
        return f"Plane({'xyz'[self.axis]}={self.offset}, class={self.class_id})"


def default_camera_calib(fx: float = 721.5, fy: float = 721.5,
                         cx: float = 621.0, cy: float = 187.5) -> CalibrationSet:
    """KITTI-like virtual camera: LiDAR x maps to camera z (optical axis)."""
    p2 = np.array([
        [fx, 0.0, cx, 0.0],
        [0.0, fy, cy, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    tr = np.array([
        [0.0, -1.0, 0.0, -0.01],
        [0.0, 0.0, -1.0, -0.07],
        [1.0, 0.0, 0.0, -0.27],
        [0.0, 0.0, 0.0, 1.0],
    ])
    return CalibrationSet(p2, np.eye(3), tr)


class Scene:
    """Primitive list plus the sensors that will render it."""

    def __init__(self, primitives, label_names: dict | None = None,
                 calib: CalibrationSet | None = None,
                 image_width: int = 1242, image_height: int = 375,
                 lidar_origin=(0.0, 0.0, 0.0)):
        self.primitives = list(primitives)
        self.label_names = dict(label_names or DEFAULT_SCENE_LABELS)
        self.calib = calib or default_camera_calib()
        self.image_width = int(image_width)
        self.image_height = int(image_height)
        self.lidar_origin = np.asarray(lidar_origin, dtype=np.float64)
        if self.image_width < 1 or self.image_height < 1:
            raise InvariantError("Scene: image must be at least 1×1")
        if self.lidar_origin.shape != (3,) or not np.all(np.isfinite(self.lidar_origin)):
            raise InvariantError("Scene: lidar_origin must be a finite 3-vector")
        if BACKGROUND_CLASS not in self.label_names:
            raise InvariantError(
                f"Scene: label map must name background class {BACKGROUND_CLASS}"
            )
        unresolved = sorted({p.class_id for p in self.primitives} - set(self.label_names))
        if unresolved:
            raise InvariantError(f"Scene: primitive class ids {unresolved} missing "
                                 "from label map")

    @property
    def class_of_primitive(self) -> np.ndarray:
        return np.array([p.class_id for p in self.primitives], dtype=np.uint8)

    def __repr__(self) -> str:
        return f"Scene({len(self.primitives)} primitives, {self.image_height}×{self.image_width})"


def _nearest_hits(primitives, origins: np.ndarray, dirs: np.ndarray,
                  t_floor: float = RAY_FLOOR):
    """Per ray: parameter and primitive index of the nearest hit (inf/-1 miss)."""
    n = len(origins)
    best_t = np.full(n, np.inf)
    best_prim = np.full(n, -1, dtype=np.int64)
    for i, prim in enumerate(primitives):
        t = prim.intersect(origins, dirs, t_floor)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_prim[closer] = i
    return best_t, best_prim


def camera_rays(calib: CalibrationSet, width: int, height: int):
    """Per-pixel ray (A, B) such that the point at homogeneous depth t is A + B t."""
    v, u = np.indices((height, width), dtype=np.float64)
    u = u.ravel()
    v = v.ravel()
    b1 = backproject_pixels(np.column_stack([u, v, np.ones_like(u)]), calib)
    b2 = backproject_pixels(np.column_stack([u, v, np.full_like(u, 2.0)]), calib)
    direction = b2 - b1
    base = b1 - direction   # = b(0)
    return base, direction


def raycast_camera(scene: Scene):
    """Render depth, segments, and surface handles through the scene camera.

    Returns ``(DepthMap, SegmentMap, hit_points, hit_primitive)`` where the
    depth value is the homogeneous depth of the hit (what back-projection
    consumes), misses are invalid pixels with the background class, and
    ``hit_primitive`` is -1 on miss.
    """
    h, w = scene.image_height, scene.image_width
    base, direction = camera_rays(scene.calib, w, h)
    t, prim = _nearest_hits(scene.primitives, base, direction)
    hit = np.isfinite(t)

    depth = np.where(hit, t, 0.0).reshape(h, w)
    class_flat = np.zeros(h * w, dtype=np.uint8)
    if len(scene.primitives):
        class_flat[hit] = scene.class_of_primitive[prim[hit]]
    points = np.zeros((h * w, 3))
    points[hit] = base[hit] + direction[hit] * t[hit, None]

    label_names = dict(scene.label_names)
    return (DepthMap(depth, hit.reshape(h, w)),
            SegmentMap(class_flat.reshape(h, w), label_names),
            points.reshape(h, w, 3),
            prim.reshape(h, w))


def lidar_rays(fov: FovSpec):
    """Unit direction per (row, column) cell center of the spherical grid."""
    v, u = np.indices((fov.height, fov.width), dtype=np.float64)
    u = u.ravel()
    v = v.ravel()
    yaw = np.pi * (1.0 - 2.0 * (u + 0.5) / fov.width)
    pitch = fov.fov_down + (fov.fov_up - fov.fov_down) * (1.0 - (v + 0.5) / fov.height)
    cos_pitch = np.cos(pitch)
    return np.column_stack([cos_pitch * np.cos(yaw),
                            cos_pitch * np.sin(yaw),
                            np.sin(pitch)])


def raycast_lidar(scene: Scene, fov: FovSpec | None = None) -> RawScan:
    """One ray per spherical-grid cell from the LiDAR origin; hits emit points."""
    fov = fov or FovSpec.default()
    dirs = lidar_rays(fov)
    origins = np.broadcast_to(scene.lidar_origin, dirs.shape)
    t, _ = _nearest_hits(scene.primitives, origins, dirs)
    hit = np.isfinite(t)
    points = origins[hit] + dirs[hit] * t[hit, None]
    return RawScan(points, np.full(hit.sum(), 0.5))


def surface_distance(points, scene: Scene):
    """Exact distance to the nearest primitive surface (inf for empty scenes)."""
    points = np.asarray(points, dtype=np.float64)
    single = points.ndim == 1
    pts = points.reshape(-1, 3)
    best = np.full(len(pts), np.inf)
    for prim in scene.primitives:
        np.minimum(best, prim.surface_distance(pts), out=best)
    return float(best[0]) if single else best


class GroundTruthFrame:
    """One rendered frame: LiDAR scan, camera rasters, per-pixel hit handles."""

    def __init__(self, scan: RawScan, depth: DepthMap, segments: SegmentMap,
                 hit_points: np.ndarray, hit_primitive: np.ndarray, scene: Scene,
                 fov: FovSpec):
        self.scan = scan
        self.depth = depth
        self.segments = segments
        self.hit_points = np.asarray(hit_points, dtype=np.float64)
        self.hit_primitive = np.asarray(hit_primitive, dtype=np.int64)
        self.scene = scene
        self.fov = fov
        shape = (depth.height, depth.width)
        if (segments.height, segments.width) != shape:
            raise InvariantError("GroundTruthFrame: raster shapes differ")
        if self.hit_primitive.shape != shape or self.hit_points.shape != shape + (3,):
            raise InvariantError("GroundTruthFrame: handle shapes differ from rasters")
        if not np.array_equal(depth.valid, self.hit_primitive >= 0):
            raise InvariantError("GroundTruthFrame: valid pixels must carry a handle")
        if len(scene.primitives):
            expected = scene.class_of_primitive[self.hit_primitive[depth.valid]]
            if not np.array_equal(segments.class_id[depth.valid], expected):
                raise InvariantError("GroundTruthFrame: segment ids disagree with hits")

    def foreground_ratio(self, foreground_ids) -> float:
        """Share of valid pixels whose class is in ``foreground_ids``."""
        valid = self.depth.valid
        if not valid.any():
            return 0.0
        fg = np.isin(self.segments.class_id[valid], sorted(set(foreground_ids)))
        return float(fg.mean())


def render_frame(scene: Scene, fov: FovSpec | None = None) -> GroundTruthFrame:
    """Render both sensors over one scene."""
    fov = fov or FovSpec.default()
    depth, segments, hit_points, hit_primitive = raycast_camera(scene)
    scan = raycast_lidar(scene, fov)
    return GroundTruthFrame(scan, depth, segments, hit_points, hit_primitive,
                            scene, fov)


def find_silhouette(mask: np.ndarray) -> np.ndarray:
    """(K,2) array of (v, u) mask pixels with a 4-neighbor outside the mask.

    Pixels on the image border count as boundary.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ContractError(f"expected H×W mask, got {mask.shape}")
    padded = np.pad(mask, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    v, u = np.nonzero(mask & ~interior)
    return np.column_stack([v, u])


def inject_long_tail(pseudo: LabeledPointCloud, depth: DepthMap,
                     segments: SegmentMap, pixels: np.ndarray, offset: float,
                     calib: CalibrationSet):
    """Append a point ``offset`` deeper than each given pixel's surface.

    Models the depth-bleed artifact at object boundaries.  Returns
    ``(cloud, injected_indices)``; the indices mark the appended points for
    test bookkeeping.  Pixels must have valid depth.
    """
    if not offset > 0:
        raise ContractError(f"offset must be positive, got {offset}")
    pixels = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    if len(pixels) == 0:
        cloud = LabeledPointCloud(pseudo.xyz, pseudo.intensity, pseudo.class_id,
                                  pseudo.pseudo, pseudo.label_names)
        return cloud, np.empty(0, dtype=np.int64)
    v, u = pixels[:, 0], pixels[:, 1]
    if not depth.valid[v, u].all():
        bad = pixels[~depth.valid[v, u]][0]
        raise ContractError(f"pixel (v={bad[0]}, u={bad[1]}) has no valid depth")
    uvz = np.column_stack([u.astype(np.float64), v.astype(np.float64),
                           depth.depth[v, u] + offset])
    xyz = backproject_pixels(uvz, calib)
    cloud = LabeledPointCloud(
        np.concatenate([pseudo.xyz, xyz]),
        np.concatenate([pseudo.intensity, np.zeros(len(xyz))]),
        np.concatenate([pseudo.class_id, segments.class_id[v, u]]),
        np.concatenate([pseudo.pseudo, np.ones(len(xyz), dtype=bool)]),
        pseudo.label_names,
    )
    injected = np.arange(len(pseudo), len(pseudo) + len(xyz), dtype=np.int64)
    return cloud, injected


def make_random_scene(seed: int, n_objects: int = 4,
                      with_background: bool = True) -> Scene:
    """Deterministic random scene within both sensors' fields of view.

    Objects sit 7-14 m ahead of the sensor in separated lateral lanes, low
    enough that the LiDAR's +3 degree upper limit still sees their tops.
    Boxes are thin along the viewing axis and spheres small, so a point
    one meter behind any silhouette is far from every surface.  With
    ``with_background`` a ground plane and a back wall make every camera
    pixel hit something.
    """
    rng = np.random.default_rng(seed)
    slots = np.linspace(-4.5, 4.5, max(n_objects, 2))
    rng.shuffle(slots)
    primitives = []
    for i in range(n_objects):
        x = rng.uniform(7.0, 14.0)
        y = slots[i] + rng.uniform(-0.3, 0.3)
        z = rng.uniform(-1.0, -0.4)
        if i % 3 == 2:
            primitives.append(Sphere((x, y, z), rng.uniform(0.3, 0.6), class_id=2))
        else:
            size = (rng.uniform(0.15, 0.3), rng.uniform(0.8, 2.0),
                    rng.uniform(0.6, 1.4))
            primitives.append(Box((x, y, z), size, class_id=1 if i % 3 == 0 else 3))
    if with_background:
        primitives.append(Plane("z", -1.73, class_id=10))
        primitives.append(Plane("x", 25.0, class_id=11))
    return Scene(primitives, DEFAULT_SCENE_LABELS)


def _require_keys(data: dict, allowed: set, context: str):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown key {unknown[0]!r} "
                          f"(allowed: {sorted(allowed)})")


def _primitive_from_dict(data: dict, index: int):
    context = f"primitives[{index}]"
    if not isinstance(data, dict):
        raise ConfigError(f"{context}: expected a mapping")
    kind = data.get("type")
    try:
        if kind == "box":
            _require_keys(data, {"type", "center", "size", "class"}, context)
            return Box(data["center"], data["size"], data["class"])
        if kind == "sphere":
            _require_keys(data, {"type", "center", "radius", "class"}, context)
            return Sphere(data["center"], data["radius"], data["class"])
        if kind == "plane":
            _require_keys(data, {"type", "axis", "offset", "class"}, context)
            return Plane(data["axis"], data["offset"], data["class"])
    except KeyError as exc:
        raise ConfigError(f"{context}: missing key {exc.args[0]!r}") from None
    raise ConfigError(f"{context}: type must be box, sphere, or plane, got {kind!r}")


def scene_from_dict(data: dict) -> Scene:
    """Build a Scene from the parsed scene-file structure."""
    if not isinstance(data, dict):
        raise ConfigError("scene file: expected a top-level mapping")
    _require_keys(data, {"camera", "labels", "primitives"}, "scene file")
    camera = data.get("camera") or {}
    _require_keys(camera, {"width", "height", "fx", "fy", "cx", "cy"}, "camera")
    labels_raw = data.get("labels")
    if not isinstance(labels_raw, dict) or not labels_raw:
        raise ConfigError("scene file: labels must be a non-empty id -> name mapping")
    try:
        labels = {int(k): str(v) for k, v in labels_raw.items()}
    except (TypeError, ValueError):
        raise ConfigError("scene file: label ids must be integers") from None
    prims_raw = data.get("primitives")
    if prims_raw is None:
        prims_raw = []
    if not isinstance(prims_raw, list):
        raise ConfigError("scene file: primitives must be a list")
    primitives = [_primitive_from_dict(p, i) for i, p in enumerate(prims_raw)]

    calib = default_camera_calib(
        fx=float(camera.get("fx", 721.5)), fy=float(camera.get("fy", 721.5)),
        cx=float(camera.get("cx", 621.0)), cy=float(camera.get("cy", 187.5)))
    try:
        return Scene(primitives, labels, calib,
                     image_width=int(camera.get("width", 1242)),
                     image_height=int(camera.get("height", 375)))
    except InvariantError as exc:
        raise ConfigError(f"scene file: {exc}") from None


def read_scene_file(path) -> Scene:
    """Load a YAML scene description (camera, labels, primitives keys)."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    return scene_from_dict(data)


def scene_to_dict(scene: Scene) -> dict:
    prims = []
    for p in scene.primitives:
        if isinstance(p, Box):
            prims.append({"type": "box", "center": p.center.tolist(),
                          "size": p.size.tolist(), "class": p.class_id})
        elif isinstance(p, Sphere):
            prims.append({"type": "sphere", "center": p.center.tolist(),
                          "radius": p.radius, "class": p.class_id})
        else:
            prims.append({"type": "plane", "axis": "xyz"[p.axis],
                          "offset": p.offset, "class": p.class_id})
    return {
        "camera": {"width": scene.image_width, "height": scene.image_height,
                   "fx": scene.calib.fx, "fy": scene.calib.fy,
                   "cx": scene.calib.cx, "cy": scene.calib.cy},
        "labels": {int(k): v for k, v in sorted(scene.label_names.items())},
        "primitives": prims,
    }


def write_scene_file(path, scene: Scene) -> None:
    Path(path).write_text(yaml.safe_dump(scene_to_dict(scene), sort_keys=False))
