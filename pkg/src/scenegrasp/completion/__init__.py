"""Voxelize, complete, average, and mesh segmented regions."""
from .baseline import BaselineCompleter, Completer, check_superset, complete_baseline
from .meshing import estimate_pose, marching_cubes, mesh_from_grid, merge_points
from .voxels import VoxelGrid, mean_shape, voxelize

__all__ = [
    "BaselineCompleter", "Completer", "VoxelGrid", "check_superset", "complete_baseline",
    "estimate_pose", "marching_cubes", "mean_shape", "merge_points", "mesh_from_grid", "voxelize",
]
