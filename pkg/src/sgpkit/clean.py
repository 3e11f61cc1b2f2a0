"""Volumetric cleaning of pseudo points against the real scan.

A pseudo point survives iff enough real points lie inside a closed volume
(sphere or axis-aligned cube) centered on it.  Distance comparisons use <=
so a real point exactly on the boundary counts.  The test runs against a
uniform voxel grid over the real scan; with cell_size >= radius every
candidate lies in the 3x3x3 cell neighborhood of the query cell, so the
indexed result equals the exhaustive pairwise result exactly.  A brute
force mode is kept as the oracle for tests.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .errors import ContractError, InvariantError
from .kitti_io import LabeledPointCloud

DEFAULT_RADIUS = 0.4
DEFAULT_SHAPE = "sphere"
DEFAULT_MIN_REAL_NEIGHBORS = 1

_SHAPES = ("sphere", "cube")


class CleanPolicy:
    """Neighborhood rule: volume shape, half-extent, and required support."""

    def __init__(self, radius: float = DEFAULT_RADIUS, shape: str = DEFAULT_SHAPE,
                 min_real_neighbors: int = DEFAULT_MIN_REAL_NEIGHBORS):
        if not (np.isfinite(radius) and radius > 0):
            raise InvariantError(f"CleanPolicy: radius must be positive, got {radius}")
        if shape not in _SHAPES:
            raise InvariantError(f"CleanPolicy: shape must be one of {_SHAPES}, got {shape!r}")
        if int(min_real_neighbors) < 1:
            raise InvariantError(
                f"CleanPolicy: min_real_neighbors must be >= 1, got {min_real_neighbors}"
            )
        self.radius = float(radius)
        self.shape = shape
        self.min_real_neighbors = int(min_real_neighbors)

    def __repr__(self) -> str:
        return (f"CleanPolicy({self.shape}, r={self.radius}, "
                f"min_real={self.min_real_neighbors})")


class VoxelIndex:
    """Uniform grid over a fixed point set: cell (ix,iy,iz) -> point indices.

    Cells are floor(x / cell_size) per axis; every point lives in exactly
    one cell.  Immutable after construction.
    """

    def __init__(self, points: np.ndarray, cell_size: float):
        if cell_size <= 0 or not np.isfinite(cell_size):
            raise ContractError(f"cell_size must be positive, got {cell_size}")
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ContractError(f"expected (N,3) points, got {points.shape}")
        self.cell_size = float(cell_size)
        self.points = points
        self.points.flags.writeable = False

        cells: dict[tuple, np.ndarray] = {}
        if len(points):
            ijk = np.floor(points / self.cell_size).astype(np.int64)
            order = np.lexsort((ijk[:, 2], ijk[:, 1], ijk[:, 0]))
            sorted_ijk = ijk[order]
            boundaries = np.flatnonzero(np.any(np.diff(sorted_ijk, axis=0), axis=1)) + 1
            for chunk in np.split(order, boundaries):
                cells[tuple(ijk[chunk[0]])] = chunk
        self.cells = cells

    def __len__(self) -> int:
        return len(self.points)

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    def cell_of(self, point) -> tuple:
        return tuple(np.floor(np.asarray(point, dtype=np.float64)
                              / self.cell_size).astype(np.int64))

    def candidates_near(self, point) -> np.ndarray:
        """Indices in the 3x3x3 cell neighborhood of the point's cell."""
        ix, iy, iz = self.cell_of(point)
        chunks = [self.cells.get((ix + dx, iy + dy, iz + dz))
                  for dx, dy, dz in product((-1, 0, 1), repeat=3)]
        chunks = [c for c in chunks if c is not None]
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)


def build_voxel_index(cloud, cell_size: float) -> VoxelIndex:
    """Index a scan or labeled cloud (anything exposing .xyz) for range queries."""
    return VoxelIndex(cloud.xyz, cell_size)


class CleanReport:
    """Kept/removed accounting for one cleaning pass."""

    def __init__(self, kept: int, removed: int):
        self.kept = int(kept)
        self.removed = int(removed)

    @property
    def total(self) -> int:
        return self.kept + self.removed

    @property
    def removal_fraction(self) -> float:
        return self.removed / self.total if self.total else 0.0

    def as_dict(self) -> dict:
        return {"kept": self.kept, "removed": self.removed,
                "removal_fraction": self.removal_fraction}

    def __repr__(self) -> str:
        return f"CleanReport(kept={self.kept}, removed={self.removed})"


def _within_counts(pxyz: np.ndarray, rxyz: np.ndarray, pidx: np.ndarray,
                   cand: np.ndarray, policy: CleanPolicy, counts: np.ndarray):
    diff = pxyz[pidx][:, None, :] - rxyz[cand][None, :, :]
    if policy.shape == "sphere":
        within = (diff * diff).sum(axis=2) <= policy.radius * policy.radius
    else:
        within = np.abs(diff).max(axis=2) <= policy.radius
    counts[pidx] += within.sum(axis=1)


def neighbor_counts(pseudo_xyz, real_xyz, policy: CleanPolicy,
                    cell_size: float | None = None,
                    method: str = "voxel") -> np.ndarray:
    """Per pseudo point, how many real points fall inside the policy volume."""
    pxyz = np.ascontiguousarray(pseudo_xyz, dtype=np.float64)
    rxyz = np.ascontiguousarray(real_xyz, dtype=np.float64)
    counts = np.zeros(len(pxyz), dtype=np.int64)
    if not len(pxyz) or not len(rxyz):
        return counts

    if method == "exhaustive":
        # O(N*M) oracle, blocked to bound memory
        for start in range(0, len(pxyz), 256):
            block = np.arange(start, min(start + 256, len(pxyz)))
            _within_counts(pxyz, rxyz, block, np.arange(len(rxyz)), policy, counts)
        return counts
    if method != "voxel":
        raise ContractError(f"method must be 'voxel' or 'exhaustive', got {method!r}")

    if cell_size is None:
        cell_size = policy.radius
    if cell_size < policy.radius:
        raise ContractError(
            f"cell_size ({cell_size}) must be >= radius ({policy.radius}) so the "
            "3x3x3 neighborhood covers the query volume"
        )
    index = VoxelIndex(rxyz, cell_size)
    pcells = np.floor(pxyz / cell_size).astype(np.int64)
    order = np.lexsort((pcells[:, 2], pcells[:, 1], pcells[:, 0]))
    sorted_cells = pcells[order]
    boundaries = np.flatnonzero(np.any(np.diff(sorted_cells, axis=0), axis=1)) + 1
    for group in np.split(order, boundaries):
        cand = index.candidates_near(pxyz[group[0]])
        if len(cand):
            _within_counts(pxyz, rxyz, group, cand, policy, counts)
    return counts


def clean_pseudo(pseudo: LabeledPointCloud, real, policy: CleanPolicy | None = None,
                 cell_size: float | None = None, method: str = "voxel"):
    """Drop pseudo points lacking real support; returns (cloud, CleanReport).

    ``real`` is any point container exposing ``.xyz`` (normally the raw
    scan).  Survivors keep their input order, labels, and provenance.
    """
    policy = policy or CleanPolicy()
    counts = neighbor_counts(pseudo.xyz, real.xyz, policy, cell_size, method)
    keep = counts >= policy.min_real_neighbors
    cloud = LabeledPointCloud(pseudo.xyz[keep], pseudo.intensity[keep],
                              pseudo.class_id[keep], pseudo.pseudo[keep],
                              pseudo.label_names)
    return cloud, CleanReport(kept=int(keep.sum()), removed=int((~keep).sum()))
