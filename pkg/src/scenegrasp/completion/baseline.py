"""Completer interface and a deterministic geometric stand-in for a learned completer."""
from __future__ import annotations

from typing import Protocol

import numpy as np
from scipy import ndimage

from ..errors import InvalidArgumentError
from .voxels import VoxelGrid

_BATCH = 4096
TOP_CAP_VOXELS = 2.0


class Completer(Protocol):
    """Shape completion contract.

    ``complete`` returns ``n_samples`` grids on the input's geometry, each a
    superset of the input binarized at 0.5.
    """

    def complete(self, grid: VoxelGrid, n_samples: int, *, view_dir, support_plane,
                 rng: np.random.Generator) -> list[VoxelGrid]:
        ...


def check_superset(grid: VoxelGrid, samples: list[VoxelGrid]) -> None:
    seen = grid.binary()
    for s in samples:
        if not grid.same_geometry(s) or np.any(seen & ~s.binary()):
            raise InvalidArgumentError("completer output does not contain the observed volume")


def _horizontal_basis(up: np.ndarray, view_dir: np.ndarray):
    h = view_dir - (view_dir @ up) * up
    if np.linalg.norm(h) > 1e-6:
        e1 = h / np.linalg.norm(h)
        mirror = True
    else:
        ref = np.array([1.0, 0.0, 0.0]) if abs(up[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = ref - (ref @ up) * up
        e1 /= np.linalg.norm(e1)
        mirror = False
    return e1, np.cross(up, e1), mirror


def _above(grid: VoxelGrid, centers: np.ndarray, plane) -> np.ndarray:
    if plane is None:
        return np.ones(len(centers), dtype=bool)
    normal, offset = plane
    return centers @ normal - offset > -0.5 * grid.voxel_size


def fill_hidden(grid: VoxelGrid, seeds: np.ndarray, view_dir: np.ndarray, plane, limits) -> np.ndarray:
    """Sweep each seed voxel along ``view_dir`` until it leaves the grid, drops
    below the plane, or exits the horizontal extent ``limits``."""
    D, vs = grid.resolution, grid.voxel_size
    e1, e2, (lo1, hi1, lo2, hi2) = limits
    steps = np.arange(0.0, D * np.sqrt(3.0) + 1.0, 0.5) * vs
    out = np.zeros((D, D, D), dtype=bool)
    for start in range(0, len(seeds), _BATCH):
        s = seeds[start:start + _BATCH]
        pos = s[:, None, :] + steps[None, :, None] * view_dir
        idx = grid.to_index(pos.reshape(-1, 3))
        inside = grid.inside(idx)
        centers = grid.centers(idx)
        a1, a2 = centers @ e1, centers @ e2
        ok = inside & _above(grid, centers, plane)
        ok &= (a1 >= lo1) & (a1 <= hi1) & (a2 >= lo2) & (a2 <= hi2)
        ok = np.logical_and.accumulate(ok.reshape(len(s), -1), axis=1).ravel()
        hit = idx[ok]
        out[hit[:, 0], hit[:, 1], hit[:, 2]] = True
    return out


def complete_baseline(grid: VoxelGrid, view_dir, support_plane=None, n_samples: int = 10,
                      rng: np.random.Generator | int | None = 0, jitter: bool = True) -> list[VoxelGrid]:
    """Geometric completion: mirror the visible shell, fill the hidden volume, jitter.

    1. The visible shell is rotated by 180 degrees about a vertical axis (a
       point reflection in the table plane), which maps the seen front onto
       the unseen back. The axis passes through the middle of the shell's top
       cap: the highest part of a resting object is seen in full from any
       raised viewpoint and sits over its centre, whereas the extent of the
       whole shell is biased toward the camera on curved bodies.
    2. Shell and mirror image are swept along ``view_dir`` down to the support
       plane, staying inside their joint horizontal extent.
       The filled volume is kept under the footprint of both shells, so
       curved bodies do not grow a skirt of shadow down to the table.
    3. Each sample is eroded, kept, or dilated by one voxel (drawn from
       ``rng``); observed voxels are always kept. ``jitter=False`` returns
       ``n_samples`` copies of the unjittered fill.
    """
    view_dir = np.asarray(view_dir, dtype=np.float64)
    if abs(np.linalg.norm(view_dir) - 1.0) > 1e-6:
        raise InvalidArgumentError("view_dir must be a unit vector")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if support_plane is not None:
        support_plane = (np.asarray(support_plane[0], dtype=np.float64), float(support_plane[1]))
        up = support_plane[0] / np.linalg.norm(support_plane[0])
        support_plane = (up, support_plane[1] / np.linalg.norm(support_plane[0]))
    else:
        up = -view_dir if abs(view_dir[2]) > 0.999 else np.array([0.0, 0.0, 1.0])

    seen = grid.binary()
    shell = grid.centers(np.argwhere(seen))
    e1, e2, mirror = _horizontal_basis(up, view_dir)
    seeds = shell
    if mirror and len(shell):
        p1, p2 = shell @ e1, shell @ e2
        h = shell @ up
        cap = h >= h.max() - TOP_CAP_VOXELS * grid.voxel_size
        mid1 = 0.5 * (p1[cap].min() + p1[cap].max())
        mid2 = 0.5 * (p2[cap].min() + p2[cap].max())
        flipped = shell - np.outer(2.0 * (p1 - mid1), e1) - np.outer(2.0 * (p2 - mid2), e2)
        seeds = np.vstack([shell, flipped])
    all_idx = np.indices(seen.shape).reshape(3, -1).T
    all_centers = grid.centers(all_idx)
    if len(seeds):
        half = 0.5 * grid.voxel_size + 1e-9
        a1, a2 = seeds @ e1, seeds @ e2
        limits = (e1, e2, (a1.min() - half, a1.max() + half, a2.min() - half, a2.max() + half))
        filled = fill_hidden(grid, seeds, view_dir, support_plane, limits)
        # hidden volume stays under the footprint of the (seen + reflected) shell
        filled &= _footprint(grid, seeds, all_centers, e1, e2).reshape(seen.shape)
        filled |= seen
    else:
        filled = seen.copy()

    allowed = _above(grid, all_centers, support_plane).reshape(filled.shape)
    structure = ndimage.generate_binary_structure(3, 1)
    samples = []
    for _ in range(n_samples):
        step = int(rng.integers(-1, 2)) if jitter else 0
        if step > 0:
            occ = (ndimage.binary_dilation(filled, structure) & allowed) | filled
        elif step < 0:
            occ = ndimage.binary_erosion(filled, structure) | seen
        else:
            occ = filled
        samples.append(grid.with_occupancy(occ.astype(np.float64)))
    return samples


def _footprint(grid: VoxelGrid, seeds: np.ndarray, centers: np.ndarray, e1, e2) -> np.ndarray:
    """Voxels whose column (along the plane normal) holds a seed, on a voxel-sized raster."""
    vs = grid.voxel_size
    s1, s2 = seeds @ e1, seeds @ e2
    lo1, lo2 = s1.min() - vs, s2.min() - vs
    n1 = int(np.floor((s1.max() + vs - lo1) / vs)) + 1
    n2 = int(np.floor((s2.max() + vs - lo2) / vs)) + 1
    raster = np.zeros((n1, n2), dtype=bool)
    raster[np.floor((s1 - lo1) / vs).astype(np.int64), np.floor((s2 - lo2) / vs).astype(np.int64)] = True
    raster = ndimage.binary_closing(raster, iterations=1) | raster
    c1 = np.floor((centers @ e1 - lo1) / vs).astype(np.int64)
    c2 = np.floor((centers @ e2 - lo2) / vs).astype(np.int64)
    inside = (c1 >= 0) & (c1 < n1) & (c2 >= 0) & (c2 < n2)
    out = np.zeros(len(centers), dtype=bool)
    out[inside] = raster[c1[inside], c2[inside]]
    return out


class BaselineCompleter:
    def complete(self, grid: VoxelGrid, n_samples: int, *, view_dir, support_plane,
                 rng: np.random.Generator) -> list[VoxelGrid]:
        return complete_baseline(grid, view_dir, support_plane, n_samples, rng)
