"""Shared fixtures: a realistic camera/LiDAR calibration."""

import numpy as np
import pytest

from sgpkit.geometry import CalibrationSet, nearest_rotation

# Values transcribed from a public KITTI training calibration file.  The
# rotation blocks are only accurate to file precision (~1e-7), so they are
# snapped to the nearest exact rotation before constructing the set, the
# same way the calib reader does.
_P2 = np.array([
    [7.215377e02, 0.0, 6.095593e02, 4.485728e01],
    [0.0, 7.215377e02, 1.728540e02, 2.163791e-01],
    [0.0, 0.0, 1.0, 2.745884e-03],
])
_R0 = np.array([
    [9.999239e-01, 9.837760e-03, -7.445048e-03],
    [-9.869795e-03, 9.999421e-01, -4.278459e-03],
    [7.402527e-03, 4.351614e-03, 9.999631e-01],
])
_TR = np.array([
    [7.533745e-03, -9.999714e-01, -6.166020e-04, -4.069766e-03],
    [1.480249e-02, 7.280733e-04, -9.998902e-01, -7.631618e-02],
    [9.998621e-01, 7.523790e-03, 1.480755e-02, -2.717806e-01],
    [0.0, 0.0, 0.0, 1.0],
])


def make_kitti_calib() -> CalibrationSet:
    r0 = nearest_rotation(_R0)
    tr = _TR.copy()
    tr[:3, :3] = nearest_rotation(_TR[:3, :3])
    return CalibrationSet(_P2, r0, tr)


@pytest.fixture
def kitti_calib() -> CalibrationSet:
    return make_kitti_calib()
