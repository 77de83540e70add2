"""Synthetic table-top scenes with a posed "real" camera."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError, PlacementError
from ..geometry import CameraModel, Pose, look_at
from ..io import read_mesh
from ..mesh import TriangleMesh, box_mesh, cylinder_mesh, icosphere_mesh
from ..renderer import SceneEstimate, SupportPlane
from ..viewpoints import default_intrinsics

PAPER_ELEVATIONS = (30.0, 45.0, 90.0)
PAPER_YAWS = (0.0, 72.0, 144.0, 216.0, 288.0)
MAX_PLACEMENT_ATTEMPTS = 1000


@dataclass(frozen=True)
class ObjectSpec:
    """A primitive ("box", "cylinder", "sphere") with dimensions in metres, or a mesh file."""

    kind: str
    dims: tuple = ()
    path: str = ""
    lying: bool = False  # cylinders: axis parallel to the table

    def mesh(self) -> TriangleMesh:
        if self.kind == "box":
            m = box_mesh(self.dims)
        elif self.kind == "cylinder":
            r, h = self.dims
            m = cylinder_mesh(r, h)
            if self.lying:
                m = m.transformed(Pose.from_axis_angle((0.0, 1.0, 0.0), math.pi / 2))
        elif self.kind == "sphere":
            m = icosphere_mesh(self.dims[0], 3)
        elif self.kind == "mesh":
            v, t = read_mesh(self.path)
            m = TriangleMesh(v, t)
        else:
            raise InvalidArgumentError(f"unknown object kind {self.kind!r}")
        return TriangleMesh(m.vertices, m.triangles)


# Desk-scale stand-ins for the household objects; every one fits the 8 cm gripper one way.
PRIMITIVES = {
    "cube": ObjectSpec("box", (0.05, 0.05, 0.05)),
    "long_box": ObjectSpec("box", (0.04, 0.14, 0.05)),
    "cylinder_upright": ObjectSpec("cylinder", (0.03, 0.10)),
    "cylinder_lying": ObjectSpec("cylinder", (0.025, 0.12), lying=True),
    "sphere": ObjectSpec("sphere", (0.03,)),
}


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple = ("cube",)
    placements: tuple | None = None     # explicit Pose per object; None with random_drop=False -> origin
    random_drop: bool = False
    camera_elevation: float = 45.0
    object_yaw: float = 0.0
    seed: int = 0
    camera_distance: float = 0.6
    camera_azimuth: float = -90.0       # degrees about +z; -90 puts the camera on the -y side
    drop_extent: float = 0.18           # half-size of the square drop area (m)
    gap: float = 0.03                   # min AABB separation for random drops (m)
    intrinsics: CameraModel = field(default_factory=default_intrinsics)

    def object_specs(self) -> list[ObjectSpec]:
        return [PRIMITIVES[o] if isinstance(o, str) else o for o in self.objects]


def rest_on_plane(mesh: TriangleMesh, yaw_deg: float, xy=(0.0, 0.0)) -> TriangleMesh:
    """Rotate about +z and translate so the lowest vertex touches z = 0."""
    m = mesh.transformed(Pose.from_axis_angle((0.0, 0.0, 1.0), math.radians(yaw_deg)))
    lo, hi = m.bounds()
    c = 0.5 * (lo + hi)
    return m.transformed(Pose(translation=(xy[0] - c[0], xy[1] - c[1], -lo[2])))


def _overlap(a, b, gap: float) -> bool:
    return bool(np.all(a[0] - gap < b[1]) and np.all(b[0] - gap < a[1]))


def drop_objects(meshes: list[TriangleMesh], rng: np.random.Generator, extent: float, gap: float) -> list[TriangleMesh]:
    """Rejection-sample non-overlapping placements with random yaw."""
    placed, boxes = [], []
    for m in meshes:
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            yaw = rng.uniform(0.0, 360.0)
            xy = rng.uniform(-extent, extent, size=2)
            cand = rest_on_plane(m, yaw, xy)
            box = cand.bounds()
            if not any(_overlap(box, b, gap) for b in boxes):
                placed.append(cand)
                boxes.append(box)
                break
        else:
            raise PlacementError(f"could not place object {len(placed)} in {MAX_PLACEMENT_ATTEMPTS} attempts")
    return placed


def real_camera(target, elevation_deg: float, distance: float, azimuth_deg: float,
                intr: CameraModel) -> CameraModel:
    """Camera looking at ``target`` from ``elevation_deg`` above the table plane."""
    e, a = math.radians(elevation_deg), math.radians(azimuth_deg)
    direction = np.array([math.cos(e) * math.cos(a), math.cos(e) * math.sin(a), math.sin(e)])
    if elevation_deg == 90.0:
        direction = np.array([0.0, 0.0, 1.0])
    eye = np.asarray(target, dtype=np.float64) + distance * direction
    # image up points away from the camera's side at 90 deg too, keeping views comparable
    fallback = -np.array([math.cos(a), math.sin(a), 0.0])
    return intr.with_pose(look_at(eye, target, up=(0.0, 0.0, 1.0), fallback_up=fallback))


def generate_scene(spec: SceneSpec) -> tuple[SceneEstimate, CameraModel]:
    specs = spec.object_specs()
    if not specs:
        raise InvalidArgumentError("scene needs at least one object")
    meshes = [s.mesh() for s in specs]
    if spec.random_drop:
        rng = np.random.default_rng(spec.seed)
        meshes = drop_objects(meshes, rng, spec.drop_extent, spec.gap)
    elif spec.placements is not None:
        if len(spec.placements) != len(meshes):
            raise InvalidArgumentError("one placement per object is required")
        meshes = [m.transformed(p) for m, p in zip(meshes, spec.placements)]
    else:
        meshes = [rest_on_plane(m, spec.object_yaw) for m in meshes]
    lo = np.min([m.bounds()[0] for m in meshes], axis=0)
    hi = np.max([m.bounds()[1] for m in meshes], axis=0)
    target = 0.5 * (lo + hi)
    cam = real_camera(target, spec.camera_elevation, spec.camera_distance, spec.camera_azimuth, spec.intrinsics)
    return SceneEstimate.from_meshes(meshes, SupportPlane()), cam


def aabbs_disjoint(scene: SceneEstimate, gap: float = 0.0) -> bool:
    boxes = [m.bounds() for m in scene.meshes]
    return not any(_overlap(boxes[i], boxes[j], gap) for i in range(len(boxes)) for j in range(i + 1, len(boxes)))


__all__ = ["MAX_PLACEMENT_ATTEMPTS", "ObjectSpec", "PAPER_ELEVATIONS", "PAPER_YAWS", "PRIMITIVES", "SceneSpec",
           "aabbs_disjoint", "drop_objects", "generate_scene", "real_camera", "rest_on_plane"]
