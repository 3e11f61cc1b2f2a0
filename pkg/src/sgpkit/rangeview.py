"""Spherical range-image projection and range-view label un-projection.

A scan is flattened onto an H×W grid by horizontal angle (yaw, full 360
degrees across the width) and elevation (pitch, spanning the vertical field
of view across the height):

    yaw   = atan2(y, x)                u = floor((0.5 (1 - yaw/pi)) W)
    pitch = asin(z / r)                v = floor((1 - (pitch - fd)/(fu - fd)) H)

with u, v clamped into bounds.  When several points land on one pixel the
nearest (smallest r) wins so occlusion is preserved; remaining ties are
broken on coordinates, which makes the image content independent of scan
order.  Everything here is a pure function over immutable inputs.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, ContractError, InvariantError
from .kitti_io import DepthMap, LabeledPointCloud, RawScan, SegmentMap

# Returns closer than this are ego-vehicle hits; they never enter the image.
RANGE_FLOOR = 0.5


class FovSpec:
    """Range-image geometry: vertical field of view in radians plus grid size.

    ``fov_down`` is negative below the horizon.  The default matches the
    64-beam spinning-scanner convention: 64×2048 pixels, +3 to -25 degrees.
    """

    def __init__(self, fov_up: float, fov_down: float, height: int = 64, width: int = 2048):
        if not (math.isfinite(fov_up) and math.isfinite(fov_down)):
            raise InvariantError("FovSpec: angles must be finite")
        if fov_up <= fov_down:
            raise InvariantError(
                f"FovSpec: fov_up ({fov_up}) must exceed fov_down ({fov_down})"
            )
        if height < 1 or width < 1:
            raise InvariantError(f"FovSpec: grid {height}×{width} must be at least 1×1")
        self.fov_up = float(fov_up)
        self.fov_down = float(fov_down)
        self.height = int(height)
        self.width = int(width)

    @classmethod
    def from_degrees(cls, fov_up_deg: float, fov_down_deg: float,
                     height: int = 64, width: int = 2048) -> "FovSpec":
        return cls(math.radians(fov_up_deg), math.radians(fov_down_deg), height, width)

    @classmethod
    def default(cls) -> "FovSpec":
        return cls.from_degrees(3.0, -25.0, 64, 2048)

    def __eq__(self, other):
        return (isinstance(other, FovSpec)
                and (self.fov_up, self.fov_down, self.height, self.width)
                == (other.fov_up, other.fov_down, other.height, other.width))

    def __repr__(self) -> str:
        return (f"FovSpec(up={math.degrees(self.fov_up):.3g}°, "
                f"down={math.degrees(self.fov_down):.3g}°, "
                f"{self.height}×{self.width})")


class RangeImage:
    """Projected scan: per-pixel range, coordinates, intensity, provenance.

    ``source_index`` holds the index of the winning scan point per pixel,
    -1 where no point landed.  ``skipped`` counts points dropped by the
    range floor.  Valid pixels satisfy r > 0 and r = |xyz| within 1e-6.
    """

    def __init__(self, r, xyz, intensity, valid, source_index, fov: FovSpec,
                 skipped: int = 0):
        self.r = np.ascontiguousarray(r, dtype=np.float64)
        self.xyz = np.ascontiguousarray(xyz, dtype=np.float64)
        self.intensity = np.ascontiguousarray(intensity, dtype=np.float64)
        self.valid = np.ascontiguousarray(valid, dtype=bool)
        self.source_index = np.ascontiguousarray(source_index, dtype=np.int64)
        self.fov = fov
        self.skipped = int(skipped)

        shape = (fov.height, fov.width)
        for name, arr, want in (("r", self.r, shape), ("xyz", self.xyz, shape + (3,)),
                                ("intensity", self.intensity, shape),
                                ("valid", self.valid, shape),
                                ("source_index", self.source_index, shape)):
            if arr.shape != want:
                raise InvariantError(f"RangeImage: {name} shape {arr.shape}, expected {want}")
        if not np.array_equal(self.valid, self.source_index >= 0):
            raise InvariantError("RangeImage: valid mask disagrees with source_index")
        if not np.array_equal(self.valid, self.r > 0):
            raise InvariantError("RangeImage: valid mask disagrees with positive range")
        norms = np.linalg.norm(self.xyz[self.valid], axis=1)
        if norms.size and np.abs(norms - self.r[self.valid]).max() > 1e-6:
            raise InvariantError("RangeImage: r differs from |xyz| beyond 1e-6")

    @property
    def height(self) -> int:
        return self.fov.height

    @property
    def width(self) -> int:
        return self.fov.width

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    def to_depth_map(self) -> DepthMap:
        """Range channel as a DepthMap for PNG export."""
        return DepthMap(np.where(self.valid, self.r, 0.0), self.valid)


def _pixel_coords(xyz: np.ndarray, fov: FovSpec):
    """Vectorized (u, v) for LiDAR-frame points; zero-range points pin to pitch 0."""
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    r = np.linalg.norm(xyz, axis=1)
    yaw = np.arctan2(y, x)
    with np.errstate(invalid="ignore"):
        pitch = np.where(r > 0, np.arcsin(np.divide(z, r, out=np.zeros_like(z),
                                                    where=r > 0)), 0.0)
    u = np.floor((0.5 * (1.0 - yaw / math.pi)) * fov.width).astype(np.int64)
    v = np.floor((1.0 - (pitch - fov.fov_down) / (fov.fov_up - fov.fov_down))
                 * fov.height).astype(np.int64)
    np.clip(u, 0, fov.width - 1, out=u)
    np.clip(v, 0, fov.height - 1, out=v)
    return u, v, r


def spherical_project(scan: RawScan, fov: FovSpec | None = None,
                      range_floor: float = RANGE_FLOOR) -> RangeImage:
    """Project a scan onto the range image; nearest point wins each pixel."""
    fov = fov or FovSpec.default()
    u, v, r = _pixel_coords(scan.xyz, fov)
    keep = r >= range_floor
    skipped = int(len(scan) - keep.sum())

    idx = np.flatnonzero(keep)
    pixel = v[idx] * fov.width + u[idx]
    # sort by pixel then range then coordinates: the winner per pixel is
    # the first row, and identical inputs in any order pick the same winner
    order = np.lexsort((scan.xyz[idx, 2], scan.xyz[idx, 1], scan.xyz[idx, 0],
                        r[idx], pixel))
    _, first = np.unique(pixel[order], return_index=True)
    winners = idx[order[first]]
    win_pixels = pixel[order[first]]

    shape = (fov.height, fov.width)
    r_img = np.zeros(shape)
    xyz_img = np.zeros(shape + (3,))
    intensity_img = np.zeros(shape)
    valid = np.zeros(shape, dtype=bool)
    source_index = np.full(shape, -1, dtype=np.int64)

    rows, cols = np.divmod(win_pixels, fov.width)
    r_img[rows, cols] = r[winners]
    xyz_img[rows, cols] = scan.xyz[winners]
    intensity_img[rows, cols] = scan.intensity[winners]
    valid[rows, cols] = True
    source_index[rows, cols] = winners
    return RangeImage(r_img, xyz_img, intensity_img, valid, source_index, fov, skipped)


def lift_labels(range_labels: SegmentMap, range_image: RangeImage, scan: RawScan,
                depth_gate: bool = False, depth_tolerance: float = 0.5,
                fallback_class: int = 0) -> LabeledPointCloud:
    """Carry per-pixel class ids back onto every point of the scan.

    Each point re-derives its (u, v) cell and inherits that pixel's label,
    so points hidden behind the pixel winner get the winner's label too.
    With ``depth_gate`` on, points whose range differs from the pixel range
    by more than ``depth_tolerance`` (or whose pixel is empty) fall back to
    ``fallback_class`` instead.
    """
    if (range_labels.height, range_labels.width) != (range_image.height, range_image.width):
        raise ContractError(
            f"label raster {range_labels.height}×{range_labels.width} does not match "
            f"range image {range_image.height}×{range_image.width}"
        )
    label_names = dict(range_labels.label_names)
    if depth_gate and fallback_class not in label_names:
        raise ConfigError(f"fallback class {fallback_class} missing from label map")

    u, v, r = _pixel_coords(scan.xyz, range_image.fov)
    class_id = range_labels.class_id[v, u].copy()
    if depth_gate:
        gap = np.abs(r - range_image.r[v, u])
        miss = ~range_image.valid[v, u] | (gap > depth_tolerance)
        class_id[miss] = fallback_class
    return LabeledPointCloud(scan.xyz, scan.intensity, class_id,
                             np.zeros(len(scan), dtype=bool), label_names)


def label_scan(scan: RawScan, label_names: dict, class_id: int = 0) -> LabeledPointCloud:
    """Wrap a raw scan as a constant-class real point cloud."""
    if class_id not in label_names:
        raise ConfigError(f"class {class_id} missing from label map")
    ids = np.full(len(scan), class_id, dtype=np.uint8)
    return LabeledPointCloud(scan.xyz, scan.intensity, ids,
                             np.zeros(len(scan), dtype=bool), label_names)
