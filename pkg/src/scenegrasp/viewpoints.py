"""Virtual camera placement around the estimated scene.

The dodecahedron sampler puts a camera at each face midpoint of the upper half
of a regular dodecahedron that has one face centred at the zenith. Those face
midpoints are the vertices of the dual icosahedron: the zenith plus a ring of
five at polar angle ``arccos(1/sqrt(5))``, 72 degrees apart.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError
from .geometry import CameraModel, look_at

RING_POLAR = float(np.arccos(1.0 / np.sqrt(5.0)))


@dataclass(frozen=True)
class ViewpointSet:
    cameras: tuple[CameraModel, ...]
    center: np.ndarray
    radius: float

    def __len__(self) -> int:
        return len(self.cameras)

    def __iter__(self):
        return iter(self.cameras)

    def __getitem__(self, i) -> CameraModel:
        return self.cameras[i]

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "radius": float(self.radius),
            "cameras": [c.to_dict() for c in self.cameras],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ViewpointSet:
        return cls(tuple(CameraModel.from_dict(c) for c in d["cameras"]),
                   np.array(d["center"], dtype=np.float64), float(d["radius"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> ViewpointSet:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _frame(up, azimuth_ref):
    up = np.asarray(up, dtype=np.float64)
    up = up / np.linalg.norm(up)
    ref = np.asarray(azimuth_ref, dtype=np.float64)
    ref = ref - (ref @ up) * up
    if np.linalg.norm(ref) < 1e-9:
        raise InvalidArgumentError("azimuth reference is parallel to up")
    ref = ref / np.linalg.norm(ref)
    return up, ref, np.cross(up, ref)


def sphere_directions(polar: np.ndarray, azimuth: np.ndarray, up, azimuth_ref) -> np.ndarray:
    """Unit directions from polar angle (from ``up``) and azimuth (from ``azimuth_ref``)."""
    up, e1, e2 = _frame(up, azimuth_ref)
    polar = np.asarray(polar, dtype=np.float64)[:, None]
    azimuth = np.asarray(azimuth, dtype=np.float64)[:, None]
    return np.cos(polar) * up + np.sin(polar) * (np.cos(azimuth) * e1 + np.sin(azimuth) * e2)


def cameras_from_directions(directions: np.ndarray, center, radius: float, up, azimuth_ref,
                            intr: CameraModel) -> ViewpointSet:
    """Place one camera per direction at ``center + radius * dir``, looking at ``center``."""
    if not radius > 0:
        raise InvalidArgumentError("radius must be positive")
    center = np.asarray(center, dtype=np.float64)
    up, ref, _ = _frame(up, azimuth_ref)
    cams = []
    for d in directions:
        eye = center + radius * d
        cams.append(intr.with_pose(look_at(eye, center, up=up, fallback_up=ref)))
    return ViewpointSet(tuple(cams), center, float(radius))


def sample_dodecahedron(center, radius: float, up=(0.0, 0.0, 1.0), intr: CameraModel | None = None,
                        azimuth_ref=(1.0, 0.0, 0.0)) -> ViewpointSet:
    """Six cameras: index 0 is the top view, 1..5 the ring starting at ``azimuth_ref``."""
    polar = np.array([0.0] + [RING_POLAR] * 5)
    azimuth = np.array([0.0] + [2.0 * np.pi * k / 5.0 for k in range(5)])
    dirs = sphere_directions(polar, azimuth, up, azimuth_ref)
    dirs[0] = _frame(up, azimuth_ref)[0]
    return cameras_from_directions(dirs, center, radius, up, azimuth_ref, intr or default_intrinsics())


def sample_top_only(center, radius: float, up=(0.0, 0.0, 1.0), intr: CameraModel | None = None,
                    azimuth_ref=(1.0, 0.0, 0.0)) -> ViewpointSet:
    full = sample_dodecahedron(center, radius, up, intr, azimuth_ref)
    return ViewpointSet(full.cameras[:1], full.center, full.radius)


def default_intrinsics() -> CameraModel:
    """640x480 with a Kinect-like 525 px focal length."""
    return CameraModel(525.0, 525.0, 319.5, 239.5, 640, 480)


Sampler = Callable[..., ViewpointSet]

SAMPLERS: dict[str, Sampler] = {
    "dodecahedron": sample_dodecahedron,
    "top-only": sample_top_only,
}


def register_sampler(name: str, sampler: Sampler) -> None:
    SAMPLERS[name] = sampler


def polar_azimuth(cam: CameraModel, center, up=(0.0, 0.0, 1.0), azimuth_ref=(1.0, 0.0, 0.0)) -> tuple[float, float]:
    """Polar angle and azimuth (rad) of a camera position about ``center``."""
    up, e1, e2 = _frame(up, azimuth_ref)
    d = cam.position - np.asarray(center, dtype=np.float64)
    d = d / np.linalg.norm(d)
    polar = float(np.arccos(np.clip(d @ up, -1.0, 1.0)))
    return polar, float(np.arctan2(d @ e2, d @ e1))


__all__ = [
    "RING_POLAR", "SAMPLERS", "ViewpointSet", "cameras_from_directions", "default_intrinsics",
    "polar_azimuth", "register_sampler", "sample_dodecahedron", "sample_top_only", "sphere_directions",
]
