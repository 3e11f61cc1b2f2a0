"""LiDAR scan augmentation with semantically guided pseudo point clouds.

The pipeline turns pixel-aligned depth and segment rasters into
class-filtered pseudo points in the sensor frame, removes pseudo points
without volumetric support from the real scan, and fuses the remainder
with the original sweep.  A stochastic-discard baseline, a spherical
range projection, and a synthetic raycasting scene generator round out
the toolkit.
"""

from .augment import (
    DensityReport,
    DiscardSpec,
    FusionResult,
    density_report,
    discard_sweep,
    fuse,
    stvd_discard,
)
from .clean import (
    CleanPolicy,
    CleanReport,
    VoxelIndex,
    build_voxel_index,
    clean_pseudo,
    neighbor_counts,
)
from .errors import (
    ConfigError,
    ContractError,
    FormatError,
    InvariantError,
    SgpKitError,
)
from .geometry import (
    CalibrationSet,
    HomogeneousPixel,
    backproject_pixel,
    backproject_pixels,
    ensure_rigid,
    invert_rigid,
    nearest_rotation,
    project_lidar_to_pixel,
    project_points,
)
from .kitti_io import (
    DepthMap,
    LabeledPointCloud,
    RawScan,
    SegmentMap,
    read_calib_file,
    read_depth_png,
    read_label_map,
    read_labeled_bin,
    read_segment_png,
    read_velodyne_bin,
    write_calib_file,
    write_depth_png,
    write_label_map,
    write_segment_png,
    write_velodyne_bin,
)
from .rangeview import (
    FovSpec,
    RangeImage,
    label_scan,
    lift_labels,
    spherical_project,
)
from .sgp import (
    ClassWhitelist,
    SgpReport,
    full_backprojection,
    sgp_generate,
)
from .simulate import (
    Box,
    GroundTruthFrame,
    Plane,
    Scene,
    Sphere,
    inject_long_tail,
    make_random_scene,
    raycast_camera,
    raycast_lidar,
    read_scene_file,
    render_frame,
    surface_distance,
    write_scene_file,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CalibrationSet",
    "ClassWhitelist",
    "CleanPolicy",
    "CleanReport",
    "ConfigError",
    "ContractError",
    "DensityReport",
    "DepthMap",
    "DiscardSpec",
    "FormatError",
    "FovSpec",
    "FusionResult",
    "GroundTruthFrame",
    "HomogeneousPixel",
    "InvariantError",
    "LabeledPointCloud",
    "Plane",
    "RangeImage",
    "RawScan",
    "Scene",
    "SegmentMap",
    "SgpKitError",
    "SgpReport",
    "Sphere",
    "VoxelIndex",
    "backproject_pixel",
    "backproject_pixels",
    "build_voxel_index",
    "clean_pseudo",
    "density_report",
    "discard_sweep",
    "ensure_rigid",
    "full_backprojection",
    "fuse",
    "inject_long_tail",
    "invert_rigid",
    "label_scan",
    "lift_labels",
    "make_random_scene",
    "nearest_rotation",
    "neighbor_counts",
    "project_lidar_to_pixel",
    "project_points",
    "raycast_camera",
    "raycast_lidar",
    "read_calib_file",
    "read_depth_png",
    "read_label_map",
    "read_labeled_bin",
    "read_scene_file",
    "read_segment_png",
    "read_velodyne_bin",
    "render_frame",
    "sgp_generate",
    "spherical_project",
    "stvd_discard",
    "surface_distance",
    "write_calib_file",
    "write_depth_png",
    "write_label_map",
    "write_scene_file",
    "write_segment_png",
    "write_velodyne_bin",
]
