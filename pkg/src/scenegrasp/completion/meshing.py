from __future__ import annotations

import numpy as np

from ..errors import EmptySurfaceError, InvalidArgumentError
from ..geometry import PointCloud, Pose
from ..mesh import TriangleMesh
from ._tables import CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE
from .voxels import VoxelGrid

# Edge crossings are kept this fraction of a cell away from lattice points so
# no triangle collapses when a sample equals the iso level.
_EDGE_MARGIN = 0.01


def marching_cubes(field: np.ndarray, iso: float = 0.5, spacing: float = 1.0, origin=(0.0, 0.0, 0.0),
                   pad: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Extract the ``iso`` surface of a sampled scalar field.

    Sample (i, j, k) sits at ``origin + (i, j, k) * spacing``. With ``pad`` a
    layer of zeros surrounds the field, so for any iso in (0, 1] the surface is
    closed. Returns (vertices, triangles) with vertices shared between cells.
    """
    f = np.asarray(field, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    if pad:
        f = np.pad(f, 1, constant_values=0.0)
        origin = origin - spacing
    nx, ny, nz = f.shape
    below = f < iso

    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for c, (ox, oy, oz) in enumerate(CORNER_OFFSETS):
        case |= below[ox:nx - 1 + ox, oy:ny - 1 + oy, oz:nz - 1 + oz].astype(np.int64) << c
    active = np.argwhere((case != 0) & (case != 255))
    if len(active) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)

    rows = TRI_TABLE[case[active[:, 0], active[:, 1], active[:, 2]], :15].reshape(len(active), 5, 3)
    cube_of_tri, slot = np.nonzero(rows[:, :, 0] >= 0)
    local_edges = rows[cube_of_tri, slot]                      # (T, 3)
    cubes = active[cube_of_tri]                                # (T, 3)

    # global key of each lattice edge: (linear index of lower endpoint) * 3 + axis
    c0 = CORNER_OFFSETS[EDGE_CORNERS[:, 0]]
    c1 = CORNER_OFFSETS[EDGE_CORNERS[:, 1]]
    lower = np.minimum(c0, c1)
    axis = np.argmax(np.abs(c1 - c0), axis=1)
    p = cubes[:, None, :] + lower[local_edges]                 # (T, 3, 3)
    keys = ((p[..., 0] * ny + p[..., 1]) * nz + p[..., 2]) * 3 + axis[local_edges]
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)

    lin, ax = np.divmod(uniq, 3)
    a = np.column_stack(np.unravel_index(lin, f.shape))
    b = a.copy()
    b[np.arange(len(b)), ax] += 1
    va = f[a[:, 0], a[:, 1], a[:, 2]]
    vb = f[b[:, 0], b[:, 1], b[:, 2]]
    t = np.clip((iso - va) / (vb - va), _EDGE_MARGIN, 1.0 - _EDGE_MARGIN)
    verts = origin + (a + t[:, None] * (b - a)) * spacing
    tris = inverse.reshape(-1, 3).astype(np.int64)

    mesh_volume = np.einsum("ij,ij->i", verts[tris[:, 0]], np.cross(verts[tris[:, 1]], verts[tris[:, 2]])).sum()
    if mesh_volume < 0:
        tris = tris[:, ::-1].copy()
    return verts, tris


def merge_points(grid: VoxelGrid, region: PointCloud) -> np.ndarray:
    """Occupancy with every voxel that contains an observed point set to 1."""
    occ = np.array(grid.occupancy)
    if len(region):
        idx = grid.to_index(region.points)
        idx = idx[grid.inside(idx)]
        occ[idx[:, 0], idx[:, 1], idx[:, 2]] = 1.0
    return occ


def mesh_from_grid(mean: VoxelGrid, region: PointCloud, iso: float = 0.5) -> TriangleMesh:
    """Merge observed points into the mean occupancy and mesh it at ``iso``.

    Lattice samples are voxel centres; vertices come out in world coordinates.
    """
    if not 0.0 < iso < 1.0:
        raise InvalidArgumentError("iso level must lie in (0, 1)")
    occ = merge_points(mean, region)
    verts, tris = marching_cubes(occ, iso, mean.voxel_size, mean.origin + 0.5 * mean.voxel_size)
    if len(tris) == 0:
        raise EmptySurfaceError("occupancy field has no iso-surface")
    pose = estimate_pose(region) if len(region) else Pose(translation=verts.mean(axis=0))
    return TriangleMesh(verts, tris, pose).cleaned()


def estimate_pose(region: PointCloud) -> Pose:
    """Centroid translation, identity rotation (mesh vertices stay in world coordinates)."""
    return Pose(translation=region.points.mean(axis=0))
