"""Background and support-plane removal."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError
from .geometry import PointCloud


@dataclass(frozen=True)
class WorkspaceModel:
    """Known table plane ``n . x = offset`` plus filtering thresholds.

    ``box_min``/``box_max`` bound the reachable workspace used by the grasp
    reachability check.
    """

    plane_normal: tuple = (0.0, 0.0, 1.0)
    plane_offset: float = 0.0
    background_depth: float = 1.5
    plane_tolerance: float = 0.01
    box_min: tuple = (-0.6, -0.6, -0.02)
    box_max: tuple = (0.6, 0.6, 0.6)
    max_tilt_deg: float = 90.0
    refine_plane: bool = False

    def __post_init__(self):
        n = np.asarray(self.plane_normal, dtype=np.float64)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            if norm == 0:
                raise InvalidArgumentError("plane normal must be non-zero")
            n = n / norm
        object.__setattr__(self, "plane_normal", tuple(float(c) for c in n))
        if not (self.background_depth > 0 and self.plane_tolerance > 0):
            raise InvalidArgumentError("filter tolerances must be positive")

    @property
    def normal(self) -> np.ndarray:
        return np.array(self.plane_normal)

    def signed_distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.normal - self.plane_offset


def keep_mask(cloud: PointCloud, ws: WorkspaceModel) -> np.ndarray:
    ranges = np.linalg.norm(cloud.points - cloud.origin, axis=1)
    near_plane = np.abs(ws.signed_distance(cloud.points)) <= ws.plane_tolerance
    return (ranges <= ws.background_depth) & ~near_plane


def filter_cloud(cloud: PointCloud, ws: WorkspaceModel) -> PointCloud:
    """Drop points beyond ``background_depth`` (range from the sensor origin)
    and points within ``plane_tolerance`` of the support plane. Order is kept."""
    if cloud.frame != "world":
        raise InvalidArgumentError("filter_cloud expects a world-frame cloud")
    if ws.refine_plane:
        ws = refine_plane(cloud, ws)
    return cloud.subset(np.flatnonzero(keep_mask(cloud, ws)))


def refine_plane(cloud: PointCloud, ws: WorkspaceModel, band: float | None = None) -> WorkspaceModel:
    """Least-squares refit of the support plane over points near the configured one."""
    band = 2.0 * ws.plane_tolerance if band is None else band
    pts = cloud.points[np.abs(ws.signed_distance(cloud.points)) <= band]
    if len(pts) < 3:
        return ws
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    n = vt[-1]
    if n @ ws.normal < 0:
        n = -n
    return replace(ws, plane_normal=tuple(n), plane_offset=float(n @ centroid))
