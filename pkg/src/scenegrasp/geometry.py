"""Rigid transforms, the pinhole camera, and pixel/point conversions.

Conventions used throughout the package:

* camera frame is +z forward, +x right, +y down (image aligned);
* depth is z-depth along the optical axis, with 0.0 marking invalid pixels;
* quaternions are stored scalar-first as (w, x, y, z);
* all lengths are meters.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import BehindCameraError, InvalidArgumentError


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _normalize_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise InvalidArgumentError(f"cannot normalize quaternion {q}")
    # leave unit quaternions untouched so a serialized pose reloads bit-exactly
    if abs(n - 1.0) > 4 * np.finfo(np.float64).eps:
        q = q / n
    # canonical hemisphere so equal rotations compare equal
    if q[0] < 0 or (q[0] == 0 and next((c for c in q[1:] if c != 0), 0) < 0):
        q = -q
    return q


@dataclass(frozen=True)
class Pose:
    """Rigid transform ``x -> R x + t``; quaternion is (w, x, y, z)."""

    rotation: np.ndarray = field(default_factory=lambda: _frozen([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: _frozen([0.0, 0.0, 0.0]))

    def __post_init__(self):
        q = _normalize_quat(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise InvalidArgumentError("pose translation must be finite")
        object.__setattr__(self, "rotation", _frozen(q))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_matrix(cls, R, t=(0.0, 0.0, 0.0)) -> Pose:
        R = np.asarray(R, dtype=np.float64)
        if R.shape == (4, 4):
            R, t = R[:3, :3], R[:3, 3]
        x, y, z, w = Rotation.from_matrix(R).as_quat()
        return cls(np.array([w, x, y, z]), np.asarray(t, dtype=np.float64))

    @classmethod
    def from_axis_angle(cls, axis, angle: float, t=(0.0, 0.0, 0.0)) -> Pose:
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        half = 0.5 * angle
        return cls(np.concatenate([[np.cos(half)], np.sin(half) * axis]), t)

    @property
    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix."""
        w, x, y, z = self.rotation
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def as_matrix4(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.matrix
        T[:3, 3] = self.translation
        return T

    def compose(self, other: Pose) -> Pose:
        """``self * other``: apply ``other`` first, then ``self``."""
        w1, x1, y1, z1 = self.rotation
        w2, x2, y2, z2 = other.rotation
        q = np.array([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ])
        return Pose(q, self.apply(other.translation))

    def __matmul__(self, other: Pose) -> Pose:
        return self.compose(other)

    def inverse(self) -> Pose:
        w, x, y, z = self.rotation
        inv = Pose(np.array([w, -x, -y, -z]))
        return Pose(inv.rotation, -inv.rotate(self.translation))

    def rotate(self, v) -> np.ndarray:
        return np.asarray(v, dtype=np.float64) @ self.matrix.T

    def apply(self, points) -> np.ndarray:
        """Transform a single 3-vector or an (N, 3) array."""
        return self.rotate(points) + self.translation

    def angle_to(self, other: Pose) -> float:
        """Rotation angle (rad) of ``self^-1 * other``."""
        d = abs(float(np.dot(self.rotation, other.rotation)))
        return 2.0 * np.arccos(min(1.0, d))

    def to_dict(self) -> dict:
        return {"quaternion": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Pose:
        return cls(np.array(d["quaternion"], dtype=np.float64), np.array(d["translation"], dtype=np.float64))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation)

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))


def look_at(eye, target, up=(0.0, 0.0, 1.0), fallback_up=(1.0, 0.0, 0.0)) -> Pose:
    """Camera-to-world pose at ``eye`` looking at ``target``.

    Image-up (-y) follows ``up`` projected into the image plane; when the view
    is parallel to ``up``, ``fallback_up`` takes its place.
    """
    eye = np.asarray(eye, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - eye
    z = z / np.linalg.norm(z)
    hint = np.asarray(up, dtype=np.float64)
    x = np.cross(z, hint)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(z, np.asarray(fallback_up, dtype=np.float64))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return Pose.from_matrix(np.column_stack([x, y, z]), eye)


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidArgumentError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidArgumentError("principal point outside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def position(self) -> np.ndarray:
        return np.array(self.pose.translation)

    @property
    def optical_axis(self) -> np.ndarray:
        """Unit +z axis of the camera in world coordinates."""
        return self.pose.matrix[:, 2].copy()

    def with_pose(self, pose: Pose) -> CameraModel:
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.width, self.height, pose)

    def intrinsics_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    def to_dict(self) -> dict:
        return {**self.intrinsics_dict(), "pose": self.pose.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> CameraModel:
        pose = Pose.from_dict(d["pose"]) if "pose" in d else Pose()
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]), pose)

    def pixel_rays(self) -> np.ndarray:
        """(H, W, 3) camera-frame ray directions with unit z component."""
        u = (np.arange(self.width, dtype=np.float64) - self.cx) / self.fx
        v = (np.arange(self.height, dtype=np.float64) - self.cy) / self.fy
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = u[None, :]
        rays[..., 1] = v[:, None]
        rays[..., 2] = 1.0
        return rays


@dataclass(frozen=True)
class DepthImage:
    """H x W z-depth map in meters; 0.0 marks invalid pixels."""

    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise InvalidArgumentError("depth image must be 2-D")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InvalidArgumentError("depth values must be finite and non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def valid(self) -> np.ndarray:
        return self.data > 0

    def matches(self, cam: CameraModel) -> bool:
        return self.data.shape == cam.shape


@dataclass(frozen=True)
class PointCloud:
    """Unordered point set in a declared frame, with the sensor origin in that frame."""

    points: np.ndarray
    frame: str = "world"
    origin: np.ndarray = field(default_factory=lambda: _frozen([0.0, 0.0, 0.0]))

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("point coordinates must be finite")
        if self.frame not in ("camera", "world"):
            raise InvalidArgumentError(f"unknown frame {self.frame!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "origin", _frozen(np.asarray(self.origin, dtype=np.float64).reshape(3)))

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, idx) -> PointCloud:
        return PointCloud(self.points[np.asarray(idx, dtype=np.int64)], self.frame, self.origin)

    def transformed(self, pose: Pose, frame: str | None = None) -> PointCloud:
        return PointCloud(pose.apply(self.points), frame or self.frame, pose.apply(self.origin))


def backproject(u: float, v: float, d: float, cam: CameraModel) -> np.ndarray:
    if not d > 0:
        raise InvalidArgumentError(f"depth must be positive, got {d}")
    if not (0 <= u <= cam.width - 1 and 0 <= v <= cam.height - 1):
        raise InvalidArgumentError(f"pixel ({u}, {v}) outside image")
    return np.array([(u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d])


def project(p, cam: CameraModel) -> tuple[float, float, float]:
    x, y, z = np.asarray(p, dtype=np.float64)
    if not z > 0:
        raise BehindCameraError(f"point has z={z}")
    return (cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy, float(z))


def project_points(points: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Vectorised ``project`` for camera-frame (N, 3) points -> (N, 3) of (u, v, d)."""
    points = np.asarray(points, dtype=np.float64)
    if np.any(points[:, 2] <= 0):
        raise BehindCameraError("some points are behind the camera")
    z = points[:, 2]
    return np.column_stack([cam.fx * points[:, 0] / z + cam.cx, cam.fy * points[:, 1] / z + cam.cy, z])


def depth_to_cloud(img: DepthImage, cam: CameraModel, to_world: bool = True) -> PointCloud:
    if not img.matches(cam):
        raise InvalidArgumentError(f"image shape {img.shape} does not match camera {cam.shape}")
    vs, us = np.nonzero(img.data > 0)
    d = img.data[vs, us]
    pts = np.column_stack([(us - cam.cx) * d / cam.fx, (vs - cam.cy) * d / cam.fy, d])
    cloud = PointCloud(pts, "camera")
    if to_world:
        return cloud.transformed(cam.pose, "world")
    return cloud
