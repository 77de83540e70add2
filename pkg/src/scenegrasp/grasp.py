"""4-DOF grasp planning on depth images, lifting to 6-DOF and selection.

The planner is a gradient-based antipodal heuristic. Contacts are pixels on the
near side of a depth discontinuity. For every such pixel we march across the
object against the depth gradient until the first edge pixel whose gradient
points the other way. The pair becomes a candidate when both gradients line up
with the jaw axis within the angle tolerance and the metric width fits the
gripper.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Protocol

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import LiftError, NoGraspError
from .filtering import WorkspaceModel
from .geometry import CameraModel, DepthImage, Pose, backproject


@dataclass(frozen=True)
class GripperParams:
    max_width: float = 0.08
    finger_thickness: float = 0.01
    clearance: float = 0.005
    finger_length: float = 0.05
    sweep_length: float = 0.10  # how far back along the approach the swept box reaches


@dataclass(frozen=True)
class PlannerParams:
    angle_tol_deg: float = 20.0
    jump_threshold: float = 0.005   # m; depth step that marks an object boundary
    grasp_offset: float = 0.015     # m below a flat rim
    rim_probe: int = 3              # px inward where the surface slope at a contact is sampled
    rim_rise: float = 0.01          # m; inward rise at which a contact counts as a curved silhouette
    min_offset: float = 0.005       # m below the contact even on a curved silhouette
    rise_scale: float = 0.01        # m; quality decays as exp(-rise / rise_scale) (0 disables)
    top_k: int = 64
    smoothing: float = 2.0          # px; Gaussian sigma before the Sobel gradient
    cluster_angle_deg: float = 10.0
    cluster_width: float = 0.005
    cluster_radius: float = 2.5     # px; centres closer than this may join one group


@dataclass(frozen=True)
class GraspCandidate:
    u: float
    v: float
    angle: float
    depth: float
    quality: float
    width: float
    viewpoint_index: int = 0
    world_pose: Pose | None = None
    reachable: bool | None = None

    @property
    def center_px(self) -> tuple[float, float]:
        return (self.u, self.v)

    @property
    def position(self) -> np.ndarray:
        return self.world_pose.translation

    @property
    def approach(self) -> np.ndarray:
        return self.world_pose.matrix[:, 2]

    @property
    def jaw_axis(self) -> np.ndarray:
        return self.world_pose.matrix[:, 0]

    def sort_key(self) -> tuple:
        return (-self.quality, self.viewpoint_index, self.u, self.v, self.angle, self.depth, self.width)


class GraspPlanner(Protocol):
    def plan(self, img: DepthImage, cam: CameraModel, viewpoint_index: int = 0) -> list[GraspCandidate]:
        ...


def canonical_angle(a: float) -> float:
    """Map a jaw-axis angle to [-pi/2, pi/2); a and a + pi describe the same grasp."""
    a = math.fmod(a + math.pi / 2.0, math.pi)
    if a < 0:
        a += math.pi
    return a - math.pi / 2.0


def edge_pixels(depth: np.ndarray, jump: float) -> np.ndarray:
    """Valid pixels with a 4-neighbour that is invalid or deeper by more than ``jump``.

    The step is measured against the linear continuation from the opposite
    neighbour, so smoothly receding surfaces (a table seen at a grazing angle)
    are not mistaken for boundaries.
    """
    valid = depth > 0
    padded = np.pad(depth, 1, constant_values=0.0)
    H, W = depth.shape
    edge = np.zeros_like(valid)
    for dv, du in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb = padded[1 + dv:1 + dv + H, 1 + du:1 + du + W]
        opp = padded[1 - dv:1 - dv + H, 1 - du:1 - du + W]
        opp = np.where(opp > 0, opp, depth)
        step = nb - depth
        excess = nb - (2.0 * depth - opp)
        outside_image = np.zeros_like(valid)
        if dv == 1:
            outside_image[-1, :] = True
        elif dv == -1:
            outside_image[0, :] = True
        elif du == 1:
            outside_image[:, -1] = True
        else:
            outside_image[:, 0] = True
        e = valid & ~outside_image & ((nb <= 0) | ((step > jump) & (excess > jump)))
        edge |= e
    return edge


def depth_gradient(depth: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit image gradient (du, dv) of the smoothed depth; invalid pixels read as far."""
    valid = depth > 0
    far = depth[valid].max() * 1.1 if valid.any() else 1.0
    filled = np.where(valid, depth, far)
    if sigma > 0:
        filled = ndimage.gaussian_filter(filled, sigma, mode="nearest")
    gu = ndimage.sobel(filled, axis=1, mode="nearest")
    gv = ndimage.sobel(filled, axis=0, mode="nearest")
    n = np.hypot(gu, gv)
    n[n == 0] = 1.0
    return gu / n, gv / n


def _pairs(depth, edge, gu, gv, cam: CameraModel, p: PlannerParams, g: GripperParams):
    """Antipodal edge pairs as arrays (pv, pu, qv, qu, step)."""
    H, W = depth.shape
    ev, eu = np.nonzero(edge)
    if len(ev) == 0:
        return None
    du, dv = -gu[ev, eu], -gv[ev, eu]               # march inwards
    d0 = depth[ev, eu]
    f = max(cam.fx, cam.fy)
    max_steps = int(math.ceil(g.max_width * f / d0.min())) + 2
    steps = np.arange(1, max_steps + 1)
    su = np.rint(eu[:, None] + steps[None, :] * du[:, None]).astype(np.int64)
    sv = np.rint(ev[:, None] + steps[None, :] * dv[:, None]).astype(np.int64)
    inside = (su >= 0) & (su < W) & (sv >= 0) & (sv < H)
    su_c, sv_c = np.clip(su, 0, W - 1), np.clip(sv, 0, H - 1)
    sd = np.where(inside, depth[sv_c, su_c], 0.0)
    prev = np.column_stack([d0, sd[:, :-1]])
    smooth = inside & (sd > 0) & (np.abs(sd - prev) <= p.jump_threshold)
    smooth = np.logical_and.accumulate(smooth, axis=1)
    # per-ray step limit from the metric width bound at this depth
    limit = np.ceil(g.max_width * f / d0) + 2
    smooth &= steps[None, :] <= limit[:, None]
    opposing = (gu[sv_c, su_c] * gu[ev, eu][:, None] + gv[sv_c, su_c] * gv[ev, eu][:, None]) < 0
    hit = smooth & edge[sv_c, su_c] & opposing
    has = hit.any(axis=1)
    first = np.argmax(hit, axis=1)
    rows = np.flatnonzero(has)
    k = first[rows]
    return ev[rows], eu[rows], sv[rows, k], su[rows, k]


def plan_antipodal(img: DepthImage, cam: CameraModel, params: PlannerParams | None = None,
                   gripper: GripperParams | None = None, viewpoint_index: int = 0) -> list[GraspCandidate]:
    """Top-K antipodal candidates, ordered by ``GraspCandidate.sort_key``."""
    p = params or PlannerParams()
    g = gripper or GripperParams()
    depth = img.data
    if not img.valid.any():
        return []
    edge = edge_pixels(depth, p.jump_threshold)
    gu, gv = depth_gradient(depth, p.smoothing)
    pairs = _pairs(depth, edge, gu, gv, cam, p, g)
    if pairs is None or len(pairs[0]) == 0:
        return []
    pv, pu, qv, qu = pairs
    dp, dq = depth[pv, pu], depth[qv, qu]

    # metric width between the two contact points
    P = np.column_stack([(pu - cam.cx) * dp / cam.fx, (pv - cam.cy) * dp / cam.fy, dp])
    Q = np.column_stack([(qu - cam.cx) * dq / cam.fx, (qv - cam.cy) * dq / cam.fy, dq])
    width = np.linalg.norm(Q - P, axis=1)

    axis = np.column_stack([qu - pu, qv - pv]).astype(np.float64)
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    cos_p = -(gu[pv, pu] * axis[:, 0] + gv[pv, pu] * axis[:, 1])
    cos_q = gu[qv, qu] * axis[:, 0] + gv[qv, qu] * axis[:, 1]
    mis = np.arccos(np.clip(np.minimum(cos_p, cos_q), -1.0, 1.0))
    ok = (mis <= np.deg2rad(p.angle_tol_deg)) & (width > 0) & (width <= g.max_width)

    uc, vc = 0.5 * (pu + qu), 0.5 * (pv + qv)
    H, W = depth.shape
    ok &= depth[np.rint(vc).astype(np.int64).clip(0, H - 1), np.rint(uc).astype(np.int64).clip(0, W - 1)] > 0
    if not ok.any():
        return []
    idx = np.flatnonzero(ok)
    pv, pu, qv, qu, dp, dq = pv[idx], pu[idx], qv[idx], qu[idx], dp[idx], dq[idx]
    width, mis, uc, vc, axis = width[idx], mis[idx], uc[idx], vc[idx], axis[idx]

    angle = np.array([canonical_angle(math.atan2(a[1], a[0])) for a in axis])

    def sample(v, u, step):
        ov = np.rint(v + step * axis[:, 1]).astype(np.int64)
        ou = np.rint(u + step * axis[:, 0]).astype(np.int64)
        inb = (ov >= 0) & (ov < H) & (ou >= 0) & (ou < W)
        return np.where(inb, depth[ov.clip(0, H - 1), ou.clip(0, W - 1)], 0.0)

    # Fingers go grasp_offset past a flat rim (box top) but stay at the contact
    # where the surface still rises steeply inwards (silhouette of a curved body).
    d_top = np.maximum(dp, dq)
    inner_p, inner_q = sample(pv, pu, p.rim_probe), sample(qv, qu, -p.rim_probe)
    rise = np.maximum(np.where(inner_p > 0, dp - inner_p, 0.0), np.where(inner_q > 0, dq - inner_q, 0.0))
    # curved contacts tolerate depth error along the approach poorly
    quality = np.cos(mis) ** 2 * np.exp(-width / g.max_width)
    if p.rise_scale > 0:
        quality = quality * np.exp(-rise / p.rise_scale)
    offset = np.maximum(p.min_offset, p.grasp_offset * np.clip(1.0 - rise / p.rim_rise, 0.0, 1.0))
    # never past halfway to whatever lies just outside the contacts
    out_p, out_q = sample(pv, pu, -1.0), sample(qv, qu, 1.0)
    d_out = np.minimum(np.where(out_p > 0, out_p, np.inf), np.where(out_q > 0, out_q, np.inf))
    gdepth = np.minimum(d_top + offset, np.where(np.isfinite(d_out), 0.5 * (d_top + d_out), np.inf))

    cands = _cluster(uc, vc, angle, width, quality, gdepth, p)
    out = [GraspCandidate(float(uc[i]), float(vc[i]), float(angle[i]), float(gdepth[i]),
                          float(np.clip(quality[i], 0.0, 1.0)), float(width[i]), viewpoint_index)
           for i in cands]
    out.sort(key=GraspCandidate.sort_key)
    return out[:p.top_k]


def _cluster(uc, vc, angle, width, quality, depth, p: PlannerParams) -> list[int]:
    """One representative per group of parallel, adjacent, similar-width pairs.

    Groups are connected components over centres within ``cluster_radius`` whose angles
    and widths differ by less than the cluster tolerances; the representative
    is the member nearest the group mean, so a family of parallel pairs along
    an object is represented by its middle.
    """
    n = len(uc)
    centers = np.column_stack([uc, vc])
    pairs = cKDTree(centers).query_pairs(p.cluster_radius, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        da = np.abs(np.mod(angle[i] - angle[j] + np.pi / 2, np.pi) - np.pi / 2)
        same = (da <= np.deg2rad(p.cluster_angle_deg)) & (np.abs(width[i] - width[j]) <= p.cluster_width)
        pairs = pairs[same]
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) \
        else coo_matrix((n, n))
    _, labels = connected_components(graph, directed=False)
    reps = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        mean = centers[members].mean(axis=0)
        dist = np.linalg.norm(centers[members] - mean, axis=1)
        order = np.lexsort((members, vc[members], uc[members], -quality[members], np.round(dist, 9)))
        reps.append(int(members[order[0]]))
    return reps


@dataclass(frozen=True)
class AntipodalPlanner:
    params: PlannerParams = field(default_factory=PlannerParams)
    gripper: GripperParams = field(default_factory=GripperParams)

    def plan(self, img: DepthImage, cam: CameraModel, viewpoint_index: int = 0) -> list[GraspCandidate]:
        return plan_antipodal(img, cam, self.params, self.gripper, viewpoint_index)


def grasp_rotation(cam: CameraModel, angle: float) -> np.ndarray:
    """Columns: jaw axis, approach x jaw, approach (= optical axis), in world frame."""
    R = cam.pose.matrix
    approach = R[:, 2]
    jaw = R @ np.array([math.cos(angle), math.sin(angle), 0.0])
    return np.column_stack([jaw, np.cross(approach, jaw), approach])


def lift_grasp(c: GraspCandidate, cam: CameraModel) -> GraspCandidate:
    if not (np.isfinite(c.depth) and c.depth > 0):
        raise LiftError(f"cannot lift a grasp with depth {c.depth}")
    try:
        p_cam = backproject(c.u, c.v, c.depth, cam)
    except ValueError as exc:
        raise LiftError(str(exc)) from exc
    angle = canonical_angle(c.angle)
    pose = Pose.from_matrix(grasp_rotation(cam, angle), cam.pose.apply(p_cam))
    return replace(c, angle=angle, world_pose=pose)


def swept_box_corners(c: GraspCandidate, g: GripperParams) -> np.ndarray:
    """Corners of the gripper box swept from ``sweep_length`` back along the approach to the grasp point."""
    R = c.world_pose.matrix
    jaw, side, approach = R[:, 0], R[:, 1], R[:, 2]
    half_open = 0.5 * min(g.max_width, c.width + 2 * g.clearance) + g.finger_thickness + g.clearance
    half_side = 0.5 * g.finger_thickness + g.clearance
    tip = c.position + g.clearance * approach
    back = c.position - g.sweep_length * approach
    corners = [base + sj * half_open * jaw + ss * half_side * side
               for base in (tip, back) for sj in (-1.0, 1.0) for ss in (-1.0, 1.0)]
    return np.array(corners)


def reachable(c: GraspCandidate, ws: WorkspaceModel, scene=None, gripper: GripperParams | None = None) -> bool:
    """Workspace box, approach tilt and swept-box-vs-plane test."""
    g = gripper or GripperParams()
    if c.world_pose is None:
        raise LiftError("candidate has no world pose")
    pos = c.position
    if np.any(pos < np.asarray(ws.box_min)) or np.any(pos > np.asarray(ws.box_max)):
        return False
    normal, offset = ws.normal, ws.plane_offset
    if scene is not None and getattr(scene, "support_plane", None) is not None:
        normal, offset = np.asarray(scene.support_plane.normal), float(scene.support_plane.offset)
    tilt = math.degrees(math.acos(float(np.clip(c.approach @ -normal, -1.0, 1.0))))
    if tilt > ws.max_tilt_deg + 1e-9:
        return False
    return bool(np.all(swept_box_corners(c, g) @ normal - offset >= 0.0))


def select_best(sets: Iterable[Iterable[GraspCandidate]]) -> GraspCandidate:
    """argmax quality over candidates not marked unreachable.

    Ties go to the lower viewpoint index, then lower u, then lower v (then
    angle, depth, width so the order is total).
    """
    best = None
    for s in sets:
        for c in s:
            if c.reachable is False:
                continue
            if best is None or c.sort_key() < best.sort_key():
                best = c
    if best is None:
        raise NoGraspError("no reachable grasp candidate")
    return best


CSV_COLUMNS = ["viewpoint", "u", "v", "angle_rad", "depth_m", "quality", "x", "y", "z",
               "qw", "qx", "qy", "qz", "width_m", "reachable"]


def candidate_row(c: GraspCandidate) -> dict:
    row = {"viewpoint": c.viewpoint_index, "u": repr(c.u), "v": repr(c.v), "angle_rad": repr(c.angle),
           "depth_m": repr(c.depth), "quality": repr(c.quality), "width_m": repr(c.width),
           "reachable": "" if c.reachable is None else str(bool(c.reachable)).lower()}
    if c.world_pose is not None:
        t, q = c.world_pose.translation, c.world_pose.rotation
        row.update({"x": repr(float(t[0])), "y": repr(float(t[1])), "z": repr(float(t[2])),
                    "qw": repr(float(q[0])), "qx": repr(float(q[1])), "qy": repr(float(q[2])),
                    "qz": repr(float(q[3]))})
    else:
        row.update({k: "" for k in ("x", "y", "z", "qw", "qx", "qy", "qz")})
    return row


def write_candidates_csv(path, candidates: Iterable[GraspCandidate]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for c in candidates:
            w.writerow(candidate_row(c))


def candidate_to_dict(c: GraspCandidate) -> dict:
    d = {"u": c.u, "v": c.v, "angle_rad": c.angle, "depth_m": c.depth, "quality": c.quality,
         "width_m": c.width, "viewpoint": c.viewpoint_index, "reachable": c.reachable}
    if c.world_pose is not None:
        d["pose"] = c.world_pose.to_dict()
    return d


__all__ = [
    "AntipodalPlanner", "CSV_COLUMNS", "GraspCandidate", "GraspPlanner", "GripperParams", "PlannerParams",
    "candidate_to_dict", "canonical_angle", "depth_gradient", "edge_pixels", "grasp_rotation", "lift_grasp",
    "plan_antipodal", "reachable", "select_best", "swept_box_corners", "write_candidates_csv",
]
