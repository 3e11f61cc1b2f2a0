"""Pseudo point generation from paired depth and segment rasters.

The generator walks the two rasters pixel to pixel, keeps pixels whose
class id is on a whitelist and whose depth is valid and in range, and
back-projects each survivor through the calibration chain into the LiDAR
frame.  Each emitted point carries its pixel's class id, zero intensity
(synthesized points have no measured reflectance), and a pseudo provenance
flag.  Output order is row-major over pixels, so identical inputs yield
byte-identical serialized outputs.

Pixel indices are used directly as ray coordinates (no half-pixel offset),
matching the floor-free forward projection in the geometry module.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ContractError
from .geometry import CalibrationSet, backproject_pixels
from .kitti_io import DepthMap, LabeledPointCloud, SegmentMap, require_same_shape

# Depths outside (DEPTH_MIN, DEPTH_MAX] count as invalid; KITTI annotations
# stop near 80 m and sub-50cm pixels are hood/self returns.
DEPTH_MIN = 0.5
DEPTH_MAX = 80.0

DEFAULT_WHITELIST_NAMES = ("car", "pedestrian", "cyclist")


class ClassWhitelist:
    """Set of class ids to keep, with names kept alongside for reporting."""

    def __init__(self, ids, label_names: dict | None = None):
        ids = list(ids)
        self.ids = frozenset(int(i) for i in ids)
        if len(self.ids) != len(ids):
            raise ConfigError("whitelist contains duplicate class ids")
        self.label_names = dict(label_names or {})

    @classmethod
    def from_names(cls, names, label_names: dict) -> "ClassWhitelist":
        by_name: dict[str, int] = {}
        for class_id, name in label_names.items():
            by_name.setdefault(name, class_id)
        missing = [n for n in names if n not in by_name]
        if missing:
            raise ConfigError(f"whitelist names {missing} not in label map "
                              f"{sorted(label_names.values())}")
        return cls([by_name[n] for n in names], label_names)

    def names(self) -> list[str]:
        return [self.label_names.get(i, str(i)) for i in sorted(self.ids)]

    def __contains__(self, class_id: int) -> bool:
        return int(class_id) in self.ids

    def __len__(self) -> int:
        return len(self.ids)

    def __repr__(self) -> str:
        return f"ClassWhitelist({sorted(self.ids)})"


class SgpReport:
    """Pixel accounting for one generation pass.

    ``discard_fraction`` is the share of valid-depth pixels the class
    filter rejected: 1 - points_emitted / pixels_valid_depth (0 when no
    pixel had valid depth).
    """

    def __init__(self, pixels_total: int, pixels_valid_depth: int,
                 pixels_whitelisted: int, points_emitted: int,
                 pixels_depth_out_of_range: int = 0):
        self.pixels_total = int(pixels_total)
        self.pixels_valid_depth = int(pixels_valid_depth)
        self.pixels_whitelisted = int(pixels_whitelisted)
        self.points_emitted = int(points_emitted)
        self.pixels_depth_out_of_range = int(pixels_depth_out_of_range)

    @property
    def discard_fraction(self) -> float:
        if self.pixels_valid_depth == 0:
            return 0.0
        return 1.0 - self.points_emitted / self.pixels_valid_depth

    def as_dict(self) -> dict:
        return {
            "pixels_total": self.pixels_total,
            "pixels_valid_depth": self.pixels_valid_depth,
            "pixels_whitelisted": self.pixels_whitelisted,
            "pixels_depth_out_of_range": self.pixels_depth_out_of_range,
            "points_emitted": self.points_emitted,
            "discard_fraction": self.discard_fraction,
        }

    def __repr__(self) -> str:
        return (f"SgpReport(emitted={self.points_emitted}, "
                f"valid={self.pixels_valid_depth}, "
                f"discard={self.discard_fraction:.3f})")


def _check_bounds(depth_min: float, depth_max: float, stride: int):
    if depth_min <= 0:
        raise ContractError(f"depth_min must be positive, got {depth_min}")
    if depth_max <= depth_min:
        raise ContractError(f"depth_max ({depth_max}) must exceed depth_min ({depth_min})")
    if stride < 1:
        raise ContractError(f"stride must be at least 1, got {stride}")


def _grid_masks(depth: DepthMap, depth_min: float, depth_max: float, stride: int):
    """Strided pixel grid plus in-range / out-of-range masks over it."""
    on_grid = np.zeros((depth.height, depth.width), dtype=bool)
    on_grid[::stride, ::stride] = True
    in_range = depth.valid & (depth.depth > depth_min) & (depth.depth <= depth_max)
    out_of_range = depth.valid & ~in_range
    return on_grid, in_range & on_grid, out_of_range & on_grid


def _emit(depth: DepthMap, mask: np.ndarray, class_id: np.ndarray,
          calib: CalibrationSet, label_names: dict) -> LabeledPointCloud:
    v, u = np.nonzero(mask)   # row-major emission order
    uvz = np.column_stack([u.astype(np.float64), v.astype(np.float64),
                           depth.depth[v, u]])
    xyz = backproject_pixels(uvz, calib)
    return LabeledPointCloud(xyz, np.zeros(len(xyz)), class_id[v, u],
                             np.ones(len(xyz), dtype=bool), label_names)


def sgp_generate(depth: DepthMap, segments: SegmentMap, whitelist: ClassWhitelist,
                 calib: CalibrationSet, depth_min: float = DEPTH_MIN,
                 depth_max: float = DEPTH_MAX, stride: int = 1):
    """Back-project whitelisted valid-depth pixels into a pseudo point cloud.

    Returns ``(cloud, report)``.  A pixel is emitted when it lies on the
    stride grid, its class id is whitelisted, and its depth is valid and in
    (depth_min, depth_max].  Raises ContractError on raster size mismatch
    and ConfigError when a whitelist id is absent from the segment map.
    """
    require_same_shape(depth, segments)
    _check_bounds(depth_min, depth_max, stride)
    unknown = sorted(whitelist.ids - set(segments.label_names))
    if unknown:
        raise ConfigError(f"whitelist ids {unknown} absent from segment label map "
                          f"{sorted(segments.label_names)}")

    on_grid, in_range, out_of_range = _grid_masks(depth, depth_min, depth_max, stride)
    whitelisted = np.isin(segments.class_id, sorted(whitelist.ids)) & on_grid
    emit = whitelisted & in_range

    cloud = _emit(depth, emit, segments.class_id, calib, segments.label_names)
    report = SgpReport(
        pixels_total=int(on_grid.sum()),
        pixels_valid_depth=int(in_range.sum()),
        pixels_whitelisted=int(whitelisted.sum()),
        points_emitted=len(cloud),
        pixels_depth_out_of_range=int(out_of_range.sum()),
    )
    return cloud, report


def full_backprojection(depth: DepthMap, calib: CalibrationSet,
                        depth_min: float = DEPTH_MIN, depth_max: float = DEPTH_MAX,
                        stride: int = 1) -> LabeledPointCloud:
    """Back-project every valid-depth pixel, ignoring classes.

    The dense-ablation baseline: equivalent to sgp_generate with an
    all-class whitelist, labeled with the single class 0 ("unlabeled").
    """
    _check_bounds(depth_min, depth_max, stride)
    _, in_range, _ = _grid_masks(depth, depth_min, depth_max, stride)
    zeros = np.zeros((depth.height, depth.width), dtype=np.uint8)
    return _emit(depth, in_range, zeros, calib, {0: "unlabeled"})
