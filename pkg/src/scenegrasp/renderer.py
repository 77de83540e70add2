"""Depth rendering of a triangle scene by BVH-accelerated ray casting.

Rays use the watertight ray/triangle test of Woop, Benthin and Wald (2013), so
rays through shared edges never slip between neighbouring triangles. Closest
hits are resolved by (t, triangle index), which makes results independent of
traversal order: BVH and brute-force queries agree bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidArgumentError
from .geometry import CameraModel, DepthImage
from .mesh import TriangleMesh, merge_meshes

# prefer OpenMP: an outdated system TBB makes numba warn on first parallel launch
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

LEAF_SIZE = 4
_STACK_SIZE = 128
# relative slack on the slab test so rounding never culls a box holding the closest hit
_SLAB_SLACK = 1.0 + 1e-9


@dataclass(frozen=True)
class SupportPlane:
    normal: tuple = (0.0, 0.0, 1.0)
    offset: float = 0.0

    def as_tuple(self):
        return np.array(self.normal, dtype=np.float64), float(self.offset)


@dataclass(frozen=True)
class SceneEstimate:
    """Objects as (world-space mesh, pose) pairs plus the table plane."""

    objects: tuple = ()
    support_plane: SupportPlane = field(default_factory=SupportPlane)
    render_plane: bool = True

    @property
    def meshes(self) -> list[TriangleMesh]:
        return [m for m, _ in self.objects]

    @classmethod
    def from_meshes(cls, meshes, support_plane=None, render_plane=True) -> SceneEstimate:
        return cls(tuple((m, m.pose) for m in meshes), support_plane or SupportPlane(), render_plane)

    def without(self, index: int) -> SceneEstimate:
        objs = tuple(o for i, o in enumerate(self.objects) if i != index)
        return SceneEstimate(objs, self.support_plane, self.render_plane)

    def centroid(self) -> np.ndarray:
        if not self.objects:
            raise InvalidArgumentError("scene has no objects")
        return np.mean([m.vertices.mean(axis=0) for m in self.meshes], axis=0)


@dataclass(frozen=True)
class Bvh:
    """Flattened BVH.

    Inner nodes store child indices in ``left``/``right``; leaves have
    ``left == -1`` and cover ``order[start:start + count]``. Triangle data stays
    in original order in ``tri`` so triangle ids are scene ids.
    """

    box_min: np.ndarray
    box_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    tri: np.ndarray
    owner: np.ndarray
    leaf_tri: np.ndarray  # tri[order], contiguous per leaf for traversal

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    @property
    def n_triangles(self) -> int:
        return len(self.tri)


def build_bvh_from_triangles(tri: np.ndarray, owner: np.ndarray | None = None) -> Bvh:
    """Median split on the longest box axis; leaves hold at most ``LEAF_SIZE`` triangles."""
    tri = np.ascontiguousarray(tri, dtype=np.float64).reshape(-1, 3, 3)
    n = len(tri)
    owner = np.zeros(n, dtype=np.int64) if owner is None else np.asarray(owner, dtype=np.int64)
    tmin, tmax = tri.min(axis=1), tri.max(axis=1)
    cent = tri.mean(axis=1)
    cap = max(1, 2 * n)
    box_min = np.zeros((cap, 3))
    box_max = np.zeros((cap, 3))
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    order = np.arange(n, dtype=np.int64)
    n_nodes = 1
    stack = [(0, 0, n)]
    while stack:
        node, lo, hi = stack.pop()
        ids = order[lo:hi]
        if hi > lo:
            box_min[node] = tmin[ids].min(axis=0)
            box_max[node] = tmax[ids].max(axis=0)
        if hi - lo <= LEAF_SIZE:
            start[node], count[node] = lo, hi - lo
            continue
        axis = int(np.argmax(box_max[node] - box_min[node]))
        order[lo:hi] = ids[np.argsort(cent[ids, axis], kind="stable")]
        mid = (lo + hi) // 2
        left[node], right[node] = n_nodes, n_nodes + 1
        n_nodes += 2
        stack.append((right[node], mid, hi))
        stack.append((left[node], lo, mid))
    return Bvh(box_min[:n_nodes].copy(), box_max[:n_nodes].copy(), left[:n_nodes].copy(),
               right[:n_nodes].copy(), start[:n_nodes].copy(), count[:n_nodes].copy(), order, tri, owner,
               np.ascontiguousarray(tri[order]))


def scene_triangles(scene: SceneEstimate) -> tuple[np.ndarray, np.ndarray]:
    verts, tris, owner = merge_meshes(scene.meshes)
    return verts[tris], owner


def build_bvh(scene: SceneEstimate) -> Bvh:
    tri, owner = scene_triangles(scene)
    if len(tri) == 0:
        raise InvalidArgumentError("scene has no triangles")
    return build_bvh_from_triangles(tri, owner)


@numba.njit(cache=True)
def _ray_setup(d):
    ax, ay, az = abs(d[0]), abs(d[1]), abs(d[2])
    kz = 0
    if ay > ax:
        kz = 1
    if az > max(ax, ay):
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    if d[kz] < 0.0:
        kx, ky = ky, kx
    return kx, ky, kz, d[kx] / d[kz], d[ky] / d[kz], 1.0 / d[kz]


@numba.njit(cache=True)
def _hit_triangle(tri, i, o, kx, ky, kz, sx, sy, sz):
    """Watertight intersection; returns t (inf on miss)."""
    ax = tri[i, 0, kx] - o[kx]
    ay = tri[i, 0, ky] - o[ky]
    az = tri[i, 0, kz] - o[kz]
    bx = tri[i, 1, kx] - o[kx]
    by = tri[i, 1, ky] - o[ky]
    bz = tri[i, 1, kz] - o[kz]
    cx = tri[i, 2, kx] - o[kx]
    cy = tri[i, 2, ky] - o[ky]
    cz = tri[i, 2, kz] - o[kz]
    ax_ = ax - sx * az
    ay_ = ay - sy * az
    bx_ = bx - sx * bz
    by_ = by - sy * bz
    cx_ = cx - sx * cz
    cy_ = cy - sy * cz
    u = cx_ * by_ - cy_ * bx_
    v = ax_ * cy_ - ay_ * cx_
    w = bx_ * ay_ - by_ * ax_
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return np.inf
    det = u + v + w
    if det == 0.0:
        return np.inf
    t_scaled = u * (sz * az) + v * (sz * bz) + w * (sz * cz)
    t = t_scaled / det
    if t <= 0.0:
        return np.inf
    return t


@numba.njit(cache=True)
def _slab_axis(lo, hi, o, inv, t0, t1):
    if inv == np.inf:
        if o < lo or o > hi:
            return np.inf, -np.inf
        return t0, t1
    ta = (lo - o) * inv
    tb = (hi - o) * inv
    if ta > tb:
        ta, tb = tb, ta
    return max(t0, ta), min(t1, tb)


@numba.njit(cache=True)
def _slab(bmin, bmax, node, ox, oy, oz, ix, iy, iz):
    """Entry distance of the ray into a node box, or inf when missed."""
    t0, t1 = _slab_axis(bmin[node, 0], bmax[node, 0], ox, ix, 0.0, np.inf)
    t0, t1 = _slab_axis(bmin[node, 1], bmax[node, 1], oy, iy, t0, t1)
    t0, t1 = _slab_axis(bmin[node, 2], bmax[node, 2], oz, iz, t0, t1)
    if t0 > t1 * _SLAB_SLACK:
        return np.inf
    return t0


@numba.njit(cache=True)
def _inv(x):
    return 1.0 / x if x != 0.0 else np.inf


@numba.njit(cache=True)
def _cast_one(bmin, bmax, left, right, start, count, order, tri, o, d, tmax, stack):
    kx, ky, kz, sx, sy, sz = _ray_setup(d)
    ox, oy, oz = o[0], o[1], o[2]
    ix, iy, iz = _inv(d[0]), _inv(d[1]), _inv(d[2])
    best = tmax
    best_id = -1
    if _slab(bmin, bmax, 0, ox, oy, oz, ix, iy, iz) == np.inf:
        return best, best_id
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if left[node] < 0:
            for k in range(start[node], start[node] + count[node]):
                t = _hit_triangle(tri, k, o, kx, ky, kz, sx, sy, sz)
                if t < np.inf:
                    i = order[k]
                    if t < best or (t == best and i < best_id):
                        best = t
                        best_id = i
            continue
        a, b = left[node], right[node]
        ta = _slab(bmin, bmax, a, ox, oy, oz, ix, iy, iz)
        tb = _slab(bmin, bmax, b, ox, oy, oz, ix, iy, iz)
        limit = best * _SLAB_SLACK
        if ta > limit:
            ta = np.inf
        if tb > limit:
            tb = np.inf
        # push the farther child first so the nearer one is popped next
        if tb < ta:
            a, b = b, a
            ta, tb = tb, ta
        if tb < np.inf:
            stack[sp] = b
            sp += 1
        if ta < np.inf:
            stack[sp] = a
            sp += 1
    return best, best_id


_BLOCK = 256


@numba.njit(cache=True, parallel=True)
def _cast_bvh(bmin, bmax, left, right, start, count, order, tri, origins, dirs, tmax):
    n = len(dirs)
    t_out = np.full(n, np.inf)
    id_out = np.full(n, -1, dtype=np.int64)
    n_blocks = (n + _BLOCK - 1) // _BLOCK
    for blk in numba.prange(n_blocks):
        stack = np.empty(_STACK_SIZE, dtype=np.int64)
        for r in range(blk * _BLOCK, min(n, (blk + 1) * _BLOCK)):
            t, i = _cast_one(bmin, bmax, left, right, start, count, order, tri,
                             origins[r], dirs[r], tmax, stack)
            if i >= 0:
                t_out[r] = t
                id_out[r] = i
    return t_out, id_out


@numba.njit(cache=True, parallel=True)
def _cast_brute(tri, origins, dirs, tmax):
    n = len(dirs)
    t_out = np.full(n, np.inf)
    id_out = np.full(n, -1, dtype=np.int64)
    for r in numba.prange(n):
        o = origins[r]
        kx, ky, kz, sx, sy, sz = _ray_setup(dirs[r])
        best = tmax
        best_id = -1
        for i in range(len(tri)):
            t = _hit_triangle(tri, i, o, kx, ky, kz, sx, sy, sz)
            if t < best or (t == best and t < np.inf and i < best_id):
                best = t
                best_id = i
        if best_id >= 0:
            t_out[r] = best
            id_out[r] = best_id
    return t_out, id_out


def _as_rays(origins, dirs):
    origins, dirs = np.broadcast_arrays(np.asarray(origins, dtype=np.float64).reshape(-1, 3),
                                        np.asarray(dirs, dtype=np.float64).reshape(-1, 3))
    return np.ascontiguousarray(origins), np.ascontiguousarray(dirs)


def intersect(bvh: Bvh, origins, dirs, tmax: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
    """Closest hit per ray: (t, triangle id); misses give (inf, -1).

    ``t`` is in units of the (unnormalised) direction vector.
    """
    origins, dirs = _as_rays(origins, dirs)
    if bvh.n_triangles == 0:
        return np.full(len(dirs), np.inf), np.full(len(dirs), -1, dtype=np.int64)
    return _cast_bvh(bvh.box_min, bvh.box_max, bvh.left, bvh.right, bvh.start, bvh.count,
                     bvh.order, bvh.leaf_tri, origins, dirs, float(tmax))


def intersect_brute(tri: np.ndarray, origins, dirs, tmax: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
    origins, dirs = _as_rays(origins, dirs)
    tri = np.ascontiguousarray(tri, dtype=np.float64).reshape(-1, 3, 3)
    return _cast_brute(tri, origins, dirs, float(tmax))


def camera_rays(cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """World-frame ray origin and per-pixel directions whose camera-frame z is 1."""
    d = cam.pixel_rays().reshape(-1, 3) @ cam.pose.matrix.T
    return cam.position, d


def plane_depth(cam: CameraModel, plane: SupportPlane, dirs: np.ndarray) -> np.ndarray:
    normal, offset = plane.as_tuple()
    denom = dirs @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (offset - cam.position @ normal) / denom
    t[~(t > 0) | ~np.isfinite(t)] = np.inf
    return t


def render_depth(scene: SceneEstimate, cam: CameraModel, bvh: Bvh | None = None,
                 brute_force: bool = False) -> DepthImage:
    """Z-depth image of the scene (nearest hit per pixel centre, 0.0 for no hit)."""
    origin, dirs = camera_rays(cam)
    t = np.full(len(dirs), np.inf)
    if scene.objects:
        if brute_force:
            tri, _ = scene_triangles(scene)
            t, _ = intersect_brute(tri, origin, dirs)
        else:
            t, _ = intersect(bvh if bvh is not None else build_bvh(scene), origin, dirs)
    if scene.render_plane:
        t = np.minimum(t, plane_depth(cam, scene.support_plane, dirs))
    t[~np.isfinite(t)] = 0.0
    return DepthImage(t.reshape(cam.height, cam.width))
