"""Region-growing segmentation of the filtered object cloud.

The output is always a true partition of the input indices: every point lands
in exactly one region. Undersized residual regions are folded into the region
whose centroid is nearest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import EmptyInputError
from .geometry import PointCloud


@dataclass(frozen=True)
class SegmentationParams:
    radius: float = 0.02
    use_normals: bool = False
    normal_angle_deg: float = 30.0
    normal_neighbors: int = 10
    min_region_size: int = 50


@dataclass
class Segmentation:
    regions: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.regions)

    def labels(self, n_points: int) -> np.ndarray:
        lab = np.full(n_points, -1, dtype=np.int64)
        for i, r in enumerate(self.regions):
            lab[r] = i
        return lab


def estimate_normals(points: np.ndarray, k: int = 10, tree: cKDTree | None = None) -> np.ndarray:
    """Unit normals from PCA over the k nearest neighbours (sign arbitrary)."""
    n = len(points)
    if n < 3:
        return np.tile([0.0, 0.0, 1.0], (n, 1))
    tree = tree or cKDTree(points)
    _, idx = tree.query(points, k=min(k, n))
    nbrs = points[idx]
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, :, 0]


def segment(cloud: PointCloud, params: SegmentationParams = SegmentationParams()) -> Segmentation:
    """Grow regions over the fixed-radius neighbour graph.

    An edge joins two points when they lie within ``radius`` and, if enabled,
    their normals differ by less than ``normal_angle_deg``. Both gates are
    symmetric, so the grown regions are the connected components of the gated
    graph; regions are ordered by their lowest point index.
    """
    pts = cloud.points
    n = len(pts)
    if n == 0:
        raise EmptyInputError("cannot segment an empty cloud")
    tree = cKDTree(pts)
    pairs = tree.query_pairs(params.radius, output_type="ndarray")
    if params.use_normals and len(pairs):
        normals = estimate_normals(pts, params.normal_neighbors, tree)
        cos_limit = np.cos(np.deg2rad(params.normal_angle_deg))
        dots = np.abs(np.einsum("ij,ij->i", normals[pairs[:, 0]], normals[pairs[:, 1]]))
        pairs = pairs[dots >= cos_limit]
    graph = coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)

    # relabel so region order follows the lowest member index
    first = np.full(comp.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, comp, np.arange(n))
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    label = rank[comp]
    sorted_idx = np.argsort(label, kind="stable")
    bounds = np.searchsorted(label[sorted_idx], np.arange(len(order) + 1))
    regions = [sorted_idx[bounds[i]:bounds[i + 1]].astype(np.int64) for i in range(len(order))]
    return Segmentation(_merge_small(regions, pts, params.min_region_size))


def _merge_small(regions: list[np.ndarray], pts: np.ndarray, min_size: int) -> list[np.ndarray]:
    sizes = np.array([len(r) for r in regions])
    keep = np.flatnonzero(sizes >= min_size)
    if len(keep) == len(regions):
        return regions
    if len(keep) == 0:
        keep = np.array([int(np.argmax(sizes))])
    anchors = {int(k): [regions[k]] for k in keep}
    anchor_ids = np.array(sorted(anchors))
    centroids = np.array([pts[regions[k]].mean(axis=0) for k in anchor_ids])
    for i, r in enumerate(regions):
        if i in anchors:
            continue
        d = np.linalg.norm(centroids - pts[r].mean(axis=0), axis=1)
        anchors[int(anchor_ids[np.argmin(d)])].append(r)
    return [np.sort(np.concatenate(anchors[k])) for k in anchor_ids]


def validate_partition(seg: Segmentation, cloud: PointCloud) -> bool:
    """Every point in exactly one region, no index out of range."""
    n = len(cloud)
    counts = np.zeros(n, dtype=np.int64)
    for r in seg.regions:
        r = np.asarray(r)
        if r.size and (r.min() < 0 or r.max() >= n or r.dtype.kind not in "iu"):
            return False
        np.add.at(counts, r, 1)
    return bool(np.all(counts == 1))
