from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRegionError, GridMismatchError, InvalidArgumentError
from ..geometry import PointCloud

MIN_CUBE_SIDE = 0.01  # m; keeps single-point or planar regions from collapsing the grid


@dataclass(frozen=True)
class VoxelGrid:
    """Cubic occupancy lattice; cell (i, j, k) spans ``origin + [i, i+1) * voxel_size`` along x, y, z."""

    occupancy: np.ndarray
    voxel_size: float
    origin: np.ndarray

    def __post_init__(self):
        occ = np.array(self.occupancy, dtype=np.float64)
        if occ.ndim != 3 or len(set(occ.shape)) != 1 or occ.shape[0] < 8:
            raise InvalidArgumentError(f"occupancy must be a D^3 array with D >= 8, got {occ.shape}")
        if np.any(occ < 0) or np.any(occ > 1):
            raise InvalidArgumentError("occupancy values must lie in [0, 1]")
        if not self.voxel_size > 0:
            raise InvalidArgumentError("voxel_size must be positive")
        occ.setflags(write=False)
        origin = np.array(self.origin, dtype=np.float64).reshape(3)
        origin.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "origin", origin)

    @property
    def resolution(self) -> int:
        return self.occupancy.shape[0]

    def binary(self, threshold: float = 0.5) -> np.ndarray:
        return self.occupancy >= threshold

    def centers(self, idx: np.ndarray) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=np.float64) + 0.5) * self.voxel_size

    def to_index(self, points: np.ndarray) -> np.ndarray:
        return np.floor((np.asarray(points, dtype=np.float64) - self.origin) / self.voxel_size).astype(np.int64)

    def inside(self, idx: np.ndarray) -> np.ndarray:
        return np.all((idx >= 0) & (idx < self.resolution), axis=-1)

    def same_geometry(self, other: VoxelGrid) -> bool:
        return (self.occupancy.shape == other.occupancy.shape and self.voxel_size == other.voxel_size
                and np.array_equal(self.origin, other.origin))

    def with_occupancy(self, occ: np.ndarray) -> VoxelGrid:
        return VoxelGrid(occ, self.voxel_size, self.origin)


def _plane_extended_bounds(lo, hi, plane):
    normal, offset = plane
    normal = np.asarray(normal, dtype=np.float64)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    feet = corners - np.outer(corners @ normal - offset, normal)
    allp = np.vstack([corners, feet])
    return allp.min(axis=0), allp.max(axis=0)


def voxelize(region: PointCloud, resolution: int = 40, min_points: int = 4, floor_plane=None) -> VoxelGrid:
    """Bin a region into a cube around its bounding box, padded by 10% per side.

    ``floor_plane`` = (normal, offset) grows the box down to the support plane
    first so hidden volume under the visible surface can be filled.
    """
    pts = region.points
    if len(pts) == 0 or len(pts) < min_points:
        raise DegenerateRegionError(f"need at least {max(min_points, 1)} points, got {len(pts)}")
    if resolution < 8:
        raise InvalidArgumentError("resolution must be at least 8")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if floor_plane is not None:
        lo, hi = _plane_extended_bounds(lo, hi, floor_plane)
    center = 0.5 * (lo + hi)
    side = max(float(np.max(hi - lo)) * 1.2, MIN_CUBE_SIDE)
    voxel_size = side / resolution
    origin = center - side / 2.0
    idx = np.clip(np.floor((pts - origin) / voxel_size).astype(np.int64), 0, resolution - 1)
    occ = np.zeros((resolution,) * 3)
    occ[idx[:, 0], idx[:, 1], idx[:, 2]] = 1.0
    return VoxelGrid(occ, voxel_size, origin)


def mean_shape(samples: list[VoxelGrid]) -> VoxelGrid:
    if not samples:
        raise InvalidArgumentError("mean_shape needs at least one sample")
    first = samples[0]
    for s in samples[1:]:
        if not first.same_geometry(s):
            raise GridMismatchError("samples have different grid geometry")
    mean = np.mean(np.stack([s.occupancy for s in samples]), axis=0)
    return first.with_occupancy(np.clip(mean, 0.0, 1.0))
