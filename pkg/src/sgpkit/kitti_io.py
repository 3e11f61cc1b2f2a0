"""Readers and writers for KITTI-style scans, calibrations, and rasters.

Formats handled here:

    velodyne ``.bin``   little-endian float32 quadruples (x, y, z, intensity)
    ``.labels`` sidecar 2 bytes per point: class_id, flags (bit 0 = pseudo)
    calib ``.txt``      ``KEY: v0 v1 ...`` lines (KITTI object devkit)
    depth ``.png``      16-bit grayscale, meters = raw / scale, raw 0 invalid
    segment ``.png``    8-bit grayscale ids + ``labelmap.txt`` (``id name`` lines)

Every read/write pair is lossless on its format's representable domain.
Readers reject malformed input with FormatError; they never return a value
that violates its type invariants.  All functions are reentrant.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractError, FormatError, InvariantError
from .geometry import CalibrationSet, nearest_rotation, orthonormality_error

DEPTH_PNG_SCALE = 256.0

# File rotations are snapped to the nearest exact rotation when within this
# coarse gate; calibrations printed at ~7 significant digits land near 1e-7.
CALIB_ORTHO_GATE = 1e-4

_CALIB_KEYS = {"P2": 12, "R0_rect": 9, "Tr_velo_to_cam": 12}


def _check_points(xyz: np.ndarray, intensity: np.ndarray, name: str):
    if xyz.ndim != 2 or xyz.shape[1] != 3:
        raise InvariantError(f"{name}: expected (N,3) coordinates, got {xyz.shape}")
    if intensity.shape != (xyz.shape[0],):
        raise InvariantError(
            f"{name}: intensity shape {intensity.shape} does not match {xyz.shape[0]} points"
        )
    if not np.all(np.isfinite(xyz)):
        raise InvariantError(f"{name}: coordinates are not all finite")
    if intensity.size and not (np.all(intensity >= 0.0) and np.all(intensity <= 1.0)):
        raise InvariantError(f"{name}: intensity outside [0, 1]")


class RawScan:
    """Unlabeled LiDAR sweep: (N,3) coordinates plus per-point intensity."""

    def __init__(self, xyz, intensity):
        self.xyz = np.ascontiguousarray(xyz, dtype=np.float64)
        self.intensity = np.ascontiguousarray(intensity, dtype=np.float64)
        _check_points(self.xyz, self.intensity, "RawScan")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def __repr__(self) -> str:
        return f"RawScan({len(self)} points)"


class LabeledPointCloud:
    """Point cloud carrying class ids and a real/pseudo provenance flag.

    ``pseudo`` is True for synthesized points.  Every class id appearing in
    ``class_id`` must resolve through ``label_names``.
    """

    def __init__(self, xyz, intensity, class_id, pseudo, label_names: dict):
        self.xyz = np.ascontiguousarray(xyz, dtype=np.float64)
        self.intensity = np.ascontiguousarray(intensity, dtype=np.float64)
        self.class_id = np.ascontiguousarray(class_id, dtype=np.uint8)
        self.pseudo = np.ascontiguousarray(pseudo, dtype=bool)
        self.label_names = dict(label_names)
        _check_points(self.xyz, self.intensity, "LabeledPointCloud")
        n = len(self)
        if self.class_id.shape != (n,) or self.pseudo.shape != (n,):
            raise InvariantError(
                "LabeledPointCloud: class_id/pseudo shapes "
                f"{self.class_id.shape}/{self.pseudo.shape} do not match {n} points"
            )
        unresolved = sorted(set(np.unique(self.class_id).tolist()) - set(self.label_names))
        if unresolved:
            raise InvariantError(
                f"LabeledPointCloud: class ids {unresolved} missing from label map"
            )

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def pseudo_count(self) -> int:
        return int(self.pseudo.sum())

    @property
    def real_count(self) -> int:
        return len(self) - self.pseudo_count

    def __repr__(self) -> str:
        return (f"LabeledPointCloud({len(self)} points, "
                f"{self.pseudo_count} pseudo)")


class DepthMap:
    """Dense per-pixel depth in meters with an explicit validity mask."""

    def __init__(self, depth, valid=None):
        self.depth = np.ascontiguousarray(depth, dtype=np.float64)
        if self.depth.ndim != 2:
            raise InvariantError(f"DepthMap: expected H×W raster, got {self.depth.shape}")
        if valid is None:
            valid = np.isfinite(self.depth) & (self.depth > 0)
        self.valid = np.ascontiguousarray(valid, dtype=bool)
        if self.valid.shape != self.depth.shape:
            raise InvariantError(
                f"DepthMap: valid mask {self.valid.shape} does not match {self.depth.shape}"
            )
        masked = self.depth[self.valid]
        if masked.size and not (np.all(np.isfinite(masked)) and np.all(masked > 0)):
            raise InvariantError("DepthMap: valid pixels must have finite positive depth")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


class SegmentMap:
    """Dense per-pixel class ids with the id → name map that resolves them."""

    def __init__(self, class_id, label_names: dict):
        self.class_id = np.ascontiguousarray(class_id, dtype=np.uint8)
        if self.class_id.ndim != 2:
            raise InvariantError(f"SegmentMap: expected H×W raster, got {self.class_id.shape}")
        self.label_names = dict(label_names)
        unresolved = sorted(set(np.unique(self.class_id).tolist()) - set(self.label_names))
        if unresolved:
            raise InvariantError(f"SegmentMap: class ids {unresolved} missing from label map")

    @property
    def height(self) -> int:
        return self.class_id.shape[0]

    @property
    def width(self) -> int:
        return self.class_id.shape[1]


def read_velodyne_bin(path) -> RawScan:
    """Read a KITTI velodyne scan (little-endian float32 x, y, z, intensity)."""
    data = Path(path).read_bytes()
    if len(data) % 16 != 0:
        raise FormatError(
            f"{path}: truncated record, file ends mid-point at byte {len(data) - len(data) % 16}"
        )
    raw = np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float64)
    bad = ~np.isfinite(raw).all(axis=1)
    if bad.any():
        raise FormatError(f"{path}: non-finite value at point {int(np.argmax(bad))}")
    return RawScan(raw[:, :3], raw[:, 3])


def labels_sidecar_path(path) -> Path:
    return Path(path).with_suffix(".labels")


def write_velodyne_bin(scan, path) -> None:
    """Write a scan in KITTI 16-byte-stride format.

    A LabeledPointCloud additionally gets a ``.labels`` sidecar next to the
    main file so detector toolchains consume the standard format unchanged.
    """
    path = Path(path)
    rows = np.column_stack([scan.xyz, scan.intensity]).astype("<f4")
    path.write_bytes(rows.tobytes())
    if isinstance(scan, LabeledPointCloud):
        rec = np.empty((len(scan), 2), dtype=np.uint8)
        rec[:, 0] = scan.class_id
        rec[:, 1] = scan.pseudo.astype(np.uint8)
        labels_sidecar_path(path).write_bytes(rec.tobytes())


def read_labeled_bin(path, label_names: dict) -> LabeledPointCloud:
    """Read a velodyne bin plus its ``.labels`` sidecar."""
    scan = read_velodyne_bin(path)
    side = labels_sidecar_path(path)
    data = side.read_bytes()
    if len(data) != 2 * len(scan):
        raise FormatError(
            f"{side}: {len(data)} bytes, expected {2 * len(scan)} for {len(scan)} points"
        )
    rec = np.frombuffer(data, dtype=np.uint8).reshape(-1, 2)
    return LabeledPointCloud(scan.xyz, scan.intensity, rec[:, 0],
                             (rec[:, 1] & 1).astype(bool), label_names)


def read_calib_file(path) -> CalibrationSet:
    """Parse a KITTI calibration text file into a CalibrationSet.

    Requires keys P2 (12 values), R0_rect (9), Tr_velo_to_cam (12); other
    keys are ignored.  Rotation blocks are stored in the file at limited
    precision, so blocks within a coarse orthonormality gate are snapped to
    the nearest exact rotation; blocks farther out are rejected.
    """
    values: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if ":" not in line:
            if line.strip():
                raise FormatError(f"{path}:{lineno}: expected 'KEY: values...' line")
            continue
        key, _, rest = line.partition(":")
        key = key.strip()
        if key not in _CALIB_KEYS:
            continue
        try:
            values[key] = np.array([float(tok) for tok in rest.split()])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric value in {key}: {exc}") from None

    for key, count in _CALIB_KEYS.items():
        if key not in values:
            raise FormatError(f"{path}: missing required key {key}")
        if values[key].size != count:
            raise FormatError(
                f"{path}: {key} expected {count} values, got {values[key].size}"
            )

    p2 = values["P2"].reshape(3, 4)
    r0 = values["R0_rect"].reshape(3, 3)
    tr = np.eye(4)
    tr[:3, :] = values["Tr_velo_to_cam"].reshape(3, 4)

    for key, block in (("R0_rect", r0), ("Tr_velo_to_cam", tr[:3, :3])):
        err = orthonormality_error(block)
        if err >= CALIB_ORTHO_GATE:
            raise FormatError(
                f"{path}: {key} rotation is not orthonormal "
                f"(||R^T R - I||_inf = {err:.3e}, gate {CALIB_ORTHO_GATE:g})"
            )
    r0 = nearest_rotation(r0)
    tr[:3, :3] = nearest_rotation(tr[:3, :3])
    return CalibrationSet(p2, r0, tr)


def write_calib_file(path, calib: CalibrationSet) -> None:
    """Write the three matrices read_calib_file requires, full precision."""
    tr = calib.tr_velo_to_cam[:3, :]
    lines = [
        "P2: " + " ".join(f"{v:.17g}" for v in calib.p2.ravel()),
        "R0_rect: " + " ".join(f"{v:.17g}" for v in calib.r0.ravel()),
        "Tr_velo_to_cam: " + " ".join(f"{v:.17g}" for v in tr.ravel()),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_depth_png(path, scale: float = DEPTH_PNG_SCALE) -> DepthMap:
    """Read a 16-bit grayscale depth raster; meters = raw/scale, raw 0 invalid."""
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I;16B", "I"):
            raise FormatError(
                f"{path}: expected 16-bit grayscale PNG, got mode {img.mode!r}"
            )
        raw = np.asarray(img, dtype=np.uint32)
    if raw.ndim != 2:
        raise FormatError(f"{path}: expected single-channel raster, got shape {raw.shape}")
    valid = raw > 0
    return DepthMap(raw.astype(np.float64) / float(scale), valid)


def write_depth_png(path, depth_map: DepthMap, scale: float = DEPTH_PNG_SCALE) -> int:
    """Write a DepthMap as 16-bit grayscale PNG; returns the saturated-pixel count.

    Valid depths beyond 65535/scale saturate at 65535.  Valid depths that
    would round to the invalid sentinel 0 are clamped to raw 1 so validity
    survives the round trip.
    """
    raw = np.rint(depth_map.depth * float(scale))
    saturated = int(np.count_nonzero(raw[depth_map.valid] > 65535))
    raw = np.clip(raw, 1, 65535)
    raw[~depth_map.valid] = 0
    Image.fromarray(raw.astype("<u2")).save(path, format="PNG")
    return saturated


def read_label_map(path) -> dict:
    """Parse ``id name`` lines into an id → name dict."""
    names: dict[int, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        ident, _, name = line.partition(" ")
        try:
            class_id = int(ident)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: class id {ident!r} is not an integer") from None
        if not name.strip():
            raise FormatError(f"{path}:{lineno}: class {class_id} has no name")
        if class_id in names:
            raise FormatError(f"{path}:{lineno}: duplicate class id {class_id}")
        if not 0 <= class_id <= 255:
            raise FormatError(f"{path}:{lineno}: class id {class_id} outside [0, 255]")
        names[class_id] = name.strip()
    return names


def write_label_map(path, label_names: dict) -> None:
    lines = [f"{class_id} {label_names[class_id]}" for class_id in sorted(label_names)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_segment_png(path, label_map_path) -> SegmentMap:
    """Read an 8-bit grayscale id raster and resolve it against a label map."""
    label_names = read_label_map(label_map_path)
    with Image.open(path) as img:
        if img.mode != "L":
            raise FormatError(f"{path}: expected 8-bit grayscale PNG, got mode {img.mode!r}")
        raw = np.asarray(img, dtype=np.uint8)
    unmapped = sorted(set(np.unique(raw).tolist()) - set(label_names))
    if unmapped:
        raise FormatError(f"{path}: unmapped class ids {unmapped} not in {label_map_path}")
    return SegmentMap(raw, label_names)


def write_segment_png(path, segment_map: SegmentMap) -> None:
    Image.fromarray(segment_map.class_id, mode="L").save(path, format="PNG")


def require_same_shape(depth: DepthMap, segments: SegmentMap) -> None:
    """Reject depth/segment pairs whose rasters differ in size."""
    if (depth.height, depth.width) != (segments.height, segments.width):
        raise ContractError(
            f"raster pair mismatch: depth {depth.height}×{depth.width} vs "
            f"segments {segments.height}×{segments.width}"
        )
