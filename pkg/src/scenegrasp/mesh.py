"""Indexed triangle meshes and closed primitive builders.

Mesh vertices are always stored in world coordinates; ``pose`` records the
object's placement for bookkeeping (scene assembly, export).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .geometry import Pose


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidArgumentError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) triangle corner coordinates."""
        return self.vertices[self.triangles]

    def face_normals(self) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)

    def triangle_areas(self) -> np.ndarray:
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def volume(self) -> float:
        """Signed enclosed volume; positive for outward-facing winding."""
        c = self.corners
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def edge_counts(self) -> dict:
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        keys, counts = np.unique(e, axis=0, return_counts=True)
        return dict(zip(map(tuple, keys.tolist()), counts.tolist()))

    def is_watertight(self) -> bool:
        """Every undirected edge is shared by exactly two triangles."""
        if len(self.triangles) == 0:
            return False
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def is_consistently_oriented(self) -> bool:
        """Each directed edge occurs once, so neighbours traverse shared edges oppositely."""
        d = self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        return len(np.unique(d, axis=0)) == len(d)

    def has_degenerate(self, tol: float = 1e-12) -> bool:
        return bool(np.any(self.triangle_areas() <= tol))

    def euler_characteristic(self) -> int:
        used = np.unique(self.triangles)
        n_edges = len(np.unique(np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1), axis=0))
        return int(len(used) - n_edges + len(self.triangles))

    def transformed(self, pose: Pose) -> TriangleMesh:
        """Apply ``pose`` to the vertices and compose it onto the recorded pose."""
        return TriangleMesh(pose.apply(self.vertices), self.triangles, pose @ self.pose)

    def cleaned(self) -> TriangleMesh:
        """Drop triangles with repeated indices and unreferenced vertices."""
        t = self.triangles
        keep = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 2] != t[:, 0])
        t = t[keep]
        used, inv = np.unique(t, return_inverse=True)
        return TriangleMesh(self.vertices[used], inv.reshape(-1, 3), self.pose)


def box_mesh(size) -> TriangleMesh:
    """Axis-aligned box centred at the origin, outward winding."""
    sx, sy, sz = np.asarray(size, dtype=np.float64) / 2.0
    v = np.array([[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)])
    # vertex index = 4*ix + 2*iy + iz
    t = np.array([
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ])
    return TriangleMesh(v, t)


def cylinder_mesh(radius: float, height: float, segments: int = 48) -> TriangleMesh:
    """Closed cylinder along z, centred at the origin."""
    a = 2 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([radius * np.cos(a), radius * np.sin(a)])
    h = height / 2.0
    v = np.vstack([
        np.column_stack([ring, np.full(segments, -h)]),
        np.column_stack([ring, np.full(segments, h)]),
        [[0.0, 0.0, -h], [0.0, 0.0, h]],
    ])
    i = np.arange(segments)
    j = (i + 1) % segments
    bottom_c, top_c = 2 * segments, 2 * segments + 1
    t = np.vstack([
        np.column_stack([i, j, j + segments]),
        np.column_stack([i, j + segments, i + segments]),
        np.column_stack([np.full(segments, bottom_c), j, i]),
        np.column_stack([np.full(segments, top_c), i + segments, j + segments]),
    ])
    return TriangleMesh(v, t)


def icosphere_mesh(radius: float, subdivisions: int = 3) -> TriangleMesh:
    phi = (1 + 5 ** 0.5) / 2
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    t = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    for _ in range(subdivisions):
        edges = np.sort(t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = inv.reshape(-1, 3) + len(v)
        v = np.vstack([v, mid])
        a, b, c = t[:, 0], t[:, 1], t[:, 2]
        ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
        t = np.vstack([
            np.column_stack([a, ab, ca]),
            np.column_stack([b, bc, ab]),
            np.column_stack([c, ca, bc]),
            np.column_stack([ab, bc, ca]),
        ])
    return TriangleMesh(v * radius, t)


def merge_meshes(meshes: list[TriangleMesh]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate meshes -> (vertices, triangles, per-triangle mesh index)."""
    verts, tris, owner = [], [], []
    offset = 0
    for i, m in enumerate(meshes):
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        owner.append(np.full(len(m.triangles), i, dtype=np.int64))
        offset += len(m.vertices)
    if not verts:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.vstack(verts), np.vstack(tris), np.concatenate(owner)
