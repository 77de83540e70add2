"""Geometric grasp-success oracle.

A grasp succeeds when the two jaws, closing along the jaw axis from the
opening width, first touch the same object, both contact normals lie inside
the friction cone around the closing direction, and neither finger runs into
anything while descending along the approach to the grasp point.
"""
from __future__ import annotations

import math

import numpy as np

from ..grasp import GraspCandidate, GripperParams
from ..renderer import Bvh, SceneEstimate, build_bvh, intersect


def _face_normals(bvh: Bvh) -> np.ndarray:
    t = bvh.tri
    n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def opening_width(c: GraspCandidate, g: GripperParams) -> float:
    return min(g.max_width, c.width + 2.0 * g.clearance)


def contacts(c: GraspCandidate, truth: SceneEstimate, g: GripperParams | None = None, bvh: Bvh | None = None):
    """Jaw contacts as ((t_a, id_a), (t_b, id_b)); jaw a starts at +jaw side and moves along -jaw."""
    g = g or GripperParams()
    bvh = bvh or build_bvh(truth)
    p, j = c.position, c.jaw_axis
    half = 0.5 * opening_width(c, g)
    origins = np.array([p + half * j, p - half * j])
    dirs = np.array([-j, j])
    t, ids = intersect(bvh, origins, dirs, tmax=2.0 * half)
    return (t[0], ids[0]), (t[1], ids[1])


def oracle_report(c: GraspCandidate, truth: SceneEstimate, friction_mu: float = 0.5,
                  gripper: GripperParams | None = None, bvh: Bvh | None = None) -> str:
    """"ok" or the first failed condition."""
    g = gripper or GripperParams()
    if c.world_pose is None:
        return "no-pose"
    if not truth.objects:
        return "empty-scene"
    bvh = bvh or build_bvh(truth)
    p, j, a = c.position, c.jaw_axis, c.approach
    half = 0.5 * opening_width(c, g)

    (ta, ia), (tb, ib) = contacts(c, truth, g, bvh)
    if ia < 0 or ib < 0:
        return "no-contact"
    if bvh.owner[ia] != bvh.owner[ib]:
        return "different-objects"
    normals = _face_normals(bvh)
    cone = math.cos(math.atan(friction_mu))
    # jaw a moves along -j, so an antipodal contact has its outward normal along +j
    if normals[ia] @ j < cone or normals[ib] @ -j < cone:
        return "outside-friction-cone"

    normal, offset = truth.support_plane.as_tuple()
    tips = np.array([p + half * j, p - half * j])
    if np.any(tips @ normal - offset < 0.0):
        return "finger-below-plane"
    starts = tips - g.sweep_length * a
    t, _ = intersect(bvh, starts, np.array([a, a]), tmax=g.sweep_length)
    if np.any(np.isfinite(t)):
        return "finger-collision"
    return "ok"


def oracle_success(c: GraspCandidate, truth: SceneEstimate, friction_mu: float = 0.5,
                   gripper: GripperParams | None = None, bvh: Bvh | None = None) -> bool:
    return oracle_report(c, truth, friction_mu, gripper, bvh) == "ok"


def grasped_object(c: GraspCandidate, truth: SceneEstimate, gripper: GripperParams | None = None,
                   bvh: Bvh | None = None) -> int:
    """Index of the object the jaws first touch (-1 when none)."""
    bvh = bvh or build_bvh(truth)
    (_, ia), _ = contacts(c, truth, gripper, bvh)
    return int(bvh.owner[ia]) if ia >= 0 else -1


__all__ = ["contacts", "grasped_object", "opening_width", "oracle_report", "oracle_success"]
