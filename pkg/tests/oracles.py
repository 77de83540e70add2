"""Independent brute-force and analytic reference implementations used by the tests."""
import math

import numpy as np


def components_bruteforce(points: np.ndarray, radius: float) -> list[list[int]]:
    """Union-find over the all-pairs radius graph; regions ordered by lowest index."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    ii, jj = np.nonzero(np.triu(d2 <= radius * radius, 1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def ray_sphere_depth(cam, center, radius) -> np.ndarray:
    """Analytic z-depth of a sphere per pixel centre (0 where missed)."""
    H, W = cam.height, cam.width
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    d_cam = np.stack([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, np.ones_like(u)], axis=-1)
    R, o = cam.pose.matrix, cam.pose.translation
    d = d_cam @ R.T
    oc = o - np.asarray(center)
    a = (d * d).sum(-1)
    b = 2 * (d @ oc)
    c = oc @ oc - radius * radius
    disc = b * b - 4 * a * c
    t = np.where(disc >= 0, (-b - np.sqrt(np.maximum(disc, 0))) / (2 * a), 0.0)
    return np.where((disc >= 0) & (t > 0), t, 0.0)  # t is z-depth since d_cam.z = 1


def icosahedron_vertices() -> np.ndarray:
    """The 12 vertices (unit length) in the classic golden-ratio construction."""
    phi = (1 + math.sqrt(5)) / 2
    v = []
    for a in (-1, 1):
        for b in (-phi, phi):
            v += [(0, a, b), (a, b, 0), (b, 0, a)]
    v = np.array(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def argmax_scan(cands):
    """Exhaustive best candidate: highest quality, then lowest (viewpoint, u, v, angle, depth, width)."""
    best = None
    for c in cands:
        if c.reachable is False:
            continue
        if best is None:
            best = c
            continue
        if c.quality > best.quality:
            best = c
        elif c.quality == best.quality:
            a = (c.viewpoint_index, c.u, c.v, c.angle, c.depth, c.width)
            b = (best.viewpoint_index, best.u, best.v, best.angle, best.depth, best.width)
            if a < b:
                best = c
    return best


def fuzz_cloud(rng, n_clusters=None, n_points=None):
    """1-5 Gaussian blobs, 50-2000 points in total."""
    k = n_clusters or int(rng.integers(1, 6))
    n = n_points or int(rng.integers(50, 2001))
    sizes = rng.multinomial(n - k, np.ones(k) / k) + 1
    centers = rng.uniform(-0.5, 0.5, (k, 3))
    scales = rng.uniform(0.005, 0.03, k)
    return np.vstack([c + s * rng.standard_normal((m, 3)) for c, s, m in zip(centers, scales, sizes)])
