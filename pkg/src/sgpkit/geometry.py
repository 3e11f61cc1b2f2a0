"""Camera/LiDAR projection geometry for KITTI-style calibrations.

Coordinate conventions (KITTI object devkit):

    LiDAR frame:   x forward, y left, z up          (meters)
    camera frame:  x right,   y down, z forward     (meters)
    image frame:   u right (column), v down (row)   (pixels)

    forward chain:   img_h = P2 . R0ext . Tr_velo_to_cam . [x y z 1]^T
    perspective:     u = img_h[0] / img_h[2],  v = img_h[1] / img_h[2]

The pixel depth ``z`` carried around by this module is the homogeneous
divisor ``img_h[2]``.  For the usual P2 whose third row is (0, 0, 1, 0)
this equals the camera-axis depth; when P2[2,3] is nonzero (real KITTI
files) the two differ by that offset and the back-projection below still
inverts the chain exactly.

All matrices are float64, row-major.  Every function is pure and every
container is frozen after construction, so everything here is safe to
share across threads.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ContractError, InvariantError

# Camera-frame depths at or below this are treated as behind the camera;
# keeps the perspective divide away from the image plane singularity.
DEPTH_FLOOR = 1e-3

# Max allowed ||R^T R - I||_inf for a matrix tagged rigid.
RIGID_ORTHO_TOL = 1e-9


def _as_matrix(m, shape, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != shape:
        raise ContractError(f"{name}: expected shape {shape}, got {m.shape}")
    return m


def orthonormality_error(r: np.ndarray) -> float:
    """Return ||R^T R - I||_inf for a 3x3 block."""
    return float(np.abs(r.T @ r - np.eye(3)).max())


def ensure_rigid(t, name: str = "transform", ortho_tol: float = RIGID_ORTHO_TOL) -> np.ndarray:
    """Validate that ``t`` is a rigid 4x4 transform; return it as float64.

    Raises InvariantError naming the first failed check: finiteness,
    bottom row (0,0,0,1), or orthonormality of the rotation block.
    """
    t = _as_matrix(t, (4, 4), name)
    if not np.all(np.isfinite(t)):
        raise InvariantError(f"{name}: entries are not all finite")
    if not np.array_equal(t[3], [0.0, 0.0, 0.0, 1.0]):
        raise InvariantError(f"{name}: bottom row is {t[3].tolist()}, expected [0, 0, 0, 1]")
    err = orthonormality_error(t[:3, :3])
    if err >= ortho_tol:
        raise InvariantError(
            f"{name}: rotation block not orthonormal, ||R^T R - I||_inf = {err:.3e}"
        )
    return t


def invert_rigid(t) -> np.ndarray:
    """Closed-form inverse of a rigid transform: (R, t) -> (R^T, -R^T t)."""
    t = ensure_rigid(t, "invert_rigid input")
    out = np.eye(4)
    rt = t[:3, :3].T
    out[:3, :3] = rt
    out[:3, 3] = -rt @ t[:3, 3]
    return out


def nearest_rotation(r: np.ndarray) -> np.ndarray:
    """Project a 3x3 matrix onto the closest proper rotation (polar/SVD)."""
    u, _, vt = np.linalg.svd(r)
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        u[:, -1] = -u[:, -1]
        rot = u @ vt
    return rot


class HomogeneousPixel(NamedTuple):
    """Image-plane sample: column u, row v, depth z (homogeneous divisor)."""

    u: float
    v: float
    z: float


class CalibrationSet:
    """KITTI projective calibration with precomputed inverse chain.

    Parameters
    ----------
    p2 : (3,4) camera projection matrix (rectified frame, pixels)
    r0 : (3,3) rectification rotation
    tr_velo_to_cam : (4,4) rigid LiDAR -> camera transform

    Derived attributes: ``r0_ext``/``r0_inv_ext`` (4x4 padded rectification
    and its inverse), ``tr_cam_to_velo``, ``forward`` (the full 3x4 chain
    P2 . R0ext . Tr), ``k_inv`` (inverse of P2's left 3x3 block) and
    ``back`` (4x4 chain Tr^-1 . R0ext^-1).  All arrays are read-only.
    """

    def __init__(self, p2, r0, tr_velo_to_cam):
        p2 = _as_matrix(p2, (3, 4), "p2")
        r0 = _as_matrix(r0, (3, 3), "r0")
        if not np.all(np.isfinite(p2)):
            raise InvariantError("p2: entries are not all finite")
        if p2[0, 0] <= 0 or p2[1, 1] <= 0:
            raise InvariantError(
                f"p2: focal entries must be positive, got fx={p2[0, 0]}, fy={p2[1, 1]}"
            )
        err = orthonormality_error(r0)
        if err >= RIGID_ORTHO_TOL:
            raise InvariantError(f"r0: not orthonormal, ||R^T R - I||_inf = {err:.3e}")
        tr = ensure_rigid(tr_velo_to_cam, "tr_velo_to_cam")

        self.p2 = p2
        self.r0 = r0
        self.tr_velo_to_cam = tr

        self.r0_ext = np.eye(4)
        self.r0_ext[:3, :3] = r0
        self.r0_inv_ext = np.eye(4)
        self.r0_inv_ext[:3, :3] = r0.T
        self.tr_cam_to_velo = invert_rigid(tr)
        self.forward = p2 @ self.r0_ext @ tr

        k = p2[:, :3]
        if abs(np.linalg.det(k)) < 1e-12:
            raise InvariantError("p2: left 3x3 block is singular, cannot back-project")
        self.k_inv = np.linalg.inv(k)
        self.back = self.tr_cam_to_velo @ self.r0_inv_ext

        for name, prod in (
            ("r0", self.r0_inv_ext @ self.r0_ext),
            ("tr_velo_to_cam", self.tr_cam_to_velo @ tr),
        ):
            res = np.abs(prod - np.eye(4)).max()
            if res >= 1e-9:
                raise InvariantError(f"{name}: inverse composition residual {res:.3e} >= 1e-9")

        for arr in (self.p2, self.r0, self.tr_velo_to_cam, self.r0_ext,
                    self.r0_inv_ext, self.tr_cam_to_velo, self.forward,
                    self.k_inv, self.back):
            arr.flags.writeable = False

    @property
    def fx(self) -> float:
        return float(self.p2[0, 0])

    @property
    def fy(self) -> float:
        return float(self.p2[1, 1])

    @property
    def cx(self) -> float:
        return float(self.p2[0, 2])

    @property
    def cy(self) -> float:
        return float(self.p2[1, 2])

    @classmethod
    def identity(cls) -> "CalibrationSet":
        """Unit-focal calibration with identity extrinsics (test fixture)."""
        p2 = np.zeros((3, 4))
        p2[0, 0] = p2[1, 1] = p2[2, 2] = 1.0
        return cls(p2, np.eye(3), np.eye(4))

    def __repr__(self) -> str:
        return (f"CalibrationSet(fx={self.fx:.6g}, fy={self.fy:.6g}, "
                f"cx={self.cx:.6g}, cy={self.cy:.6g})")


def project_points(points, calib: CalibrationSet, depth_floor: float = DEPTH_FLOOR):
    """Project (N,3) LiDAR-frame points to pixel coordinates.

    Returns ``(uvz, in_front)`` where ``uvz`` is (N,3) float64 holding
    (u, v, z) per point and ``in_front`` marks points whose depth exceeds
    ``depth_floor``.  Rows of ``uvz`` with ``in_front`` False hold NaN in
    u and v (the behind-camera marker); z is always filled.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ContractError(f"project_points: expected (N,3) points, got {points.shape}")
    img = points @ calib.forward[:, :3].T + calib.forward[:, 3]
    z = img[:, 2]
    in_front = z > depth_floor
    uvz = np.full_like(img, np.nan)
    uvz[:, 2] = z
    np.divide(img[:, 0], z, out=uvz[:, 0], where=in_front)
    np.divide(img[:, 1], z, out=uvz[:, 1], where=in_front)
    return uvz, in_front


def project_lidar_to_pixel(p, calib: CalibrationSet,
                           depth_floor: float = DEPTH_FLOOR) -> HomogeneousPixel | None:
    """Single-point projection; returns None for points behind the camera."""
    p = np.asarray(p, dtype=np.float64).reshape(1, 3)
    if not np.all(np.isfinite(p)):
        raise ContractError("project_lidar_to_pixel: point is not finite")
    uvz, in_front = project_points(p, calib, depth_floor)
    if not in_front[0]:
        return None
    return HomogeneousPixel(*uvz[0])


def backproject_pixels(uvz, calib: CalibrationSet) -> np.ndarray:
    """Back-project (N,3) pixel samples (u, v, z) into the LiDAR frame.

    Inverts the full forward chain: undo P2 as an affine map (this also
    removes the fourth-column offsets), then apply the inverse
    rectification and rigid transforms.  Exact inverse of project_points
    on its domain.
    """
    uvz = np.asarray(uvz, dtype=np.float64)
    if uvz.ndim != 2 or uvz.shape[1] != 3:
        raise ContractError(f"backproject_pixels: expected (N,3) samples, got {uvz.shape}")
    z = uvz[:, 2]
    if uvz.size and not np.all(z > 0):
        bad = int(np.argmin(z > 0))
        raise ContractError(
            f"backproject_pixels: depth must be positive, got z={z[bad]} at row {bad}"
        )
    img = np.empty_like(uvz)
    img[:, 0] = uvz[:, 0] * z
    img[:, 1] = uvz[:, 1] * z
    img[:, 2] = z
    cam = (img - calib.p2[:, 3]) @ calib.k_inv.T
    return cam @ calib.back[:3, :3].T + calib.back[:3, 3]


def backproject_pixel(px, calib: CalibrationSet) -> np.ndarray:
    """Single-pixel back-projection; accepts a HomogeneousPixel or (u,v,z)."""
    u, v, z = px
    return backproject_pixels(np.array([[u, v, z]]), calib)[0]
