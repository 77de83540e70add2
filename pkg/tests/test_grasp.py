import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenegrasp.errors import LiftError, NoGraspError
from scenegrasp.filtering import WorkspaceModel
from scenegrasp.geometry import CameraModel, DepthImage, Pose, look_at, project
from scenegrasp.grasp import (CSV_COLUMNS, GraspCandidate, GripperParams, PlannerParams, canonical_angle, lift_grasp,
                              plan_antipodal, reachable, select_best, write_candidates_csv)
from scenegrasp.harness.scenes import rest_on_plane
from scenegrasp.mesh import box_mesh, icosphere_mesh
from scenegrasp.renderer import SceneEstimate, render_depth

from .conftest import top_camera
from .oracles import argmax_scan


def _proj(p, cam):
    return project(cam.pose.inverse().apply(p), cam)


def _box_view(yaw_deg=0.0, xy=(0.0, 0.0)):
    box = rest_on_plane(box_mesh((0.03, 0.07, 0.04)), yaw_deg, xy)
    cam = top_camera(0.7)
    return render_depth(SceneEstimate.from_meshes([box]), cam), cam, box


@pytest.mark.parametrize("yaw", [0.0, 30.0, 72.0, 120.0, 200.0, 250.0, 333.0])
def test_box_top_down_centre_and_angle(yaw):
    img, cam, box = _box_view(yaw, (0.02, -0.01))
    best = plan_antipodal(img, cam)[0]
    top = box.bounds()[1][2]
    u0, v0, _ = _proj(np.array([0.02, -0.01, top]), cam)
    assert math.hypot(best.u - u0, best.v - v0) <= 2.0
    # short axis of the box, as seen in the image
    short = np.array([math.cos(math.radians(yaw)), math.sin(math.radians(yaw)), 0.0])
    a, b = _proj(np.array([0.02, -0.01, top]) - 0.01 * short, cam), _proj(np.array([0.02, -0.01, top]) + 0.01 * short, cam)
    expected = canonical_angle(math.atan2(b[1] - a[1], b[0] - a[0]))
    diff = abs(canonical_angle(best.angle - expected))
    assert math.degrees(diff) <= 5.0
    assert best.width == pytest.approx(0.03, abs=0.004)
    assert best.world_pose is None and best.viewpoint_index == 0


def test_candidates_sorted_and_bounded():
    img, cam, _ = _box_view()
    cands = plan_antipodal(img, cam, PlannerParams(top_k=5))
    assert 0 < len(cands) <= 5
    assert [c.sort_key() for c in cands] == sorted(c.sort_key() for c in cands)
    assert all(0.0 <= c.quality <= 1.0 and -math.pi / 2 <= c.angle < math.pi / 2 for c in cands)


def test_all_invalid_image_gives_no_candidates():
    cam = top_camera()
    assert plan_antipodal(DepthImage(np.zeros((cam.height, cam.width))), cam) == []


def test_object_wider_than_gripper_gives_no_candidates():
    sphere = icosphere_mesh(0.06, 4).transformed(Pose(translation=(0, 0, 0.06)))
    cam = top_camera(0.7)
    img = render_depth(SceneEstimate.from_meshes([sphere]), cam)
    assert plan_antipodal(img, cam) == []
    assert plan_antipodal(img, cam, gripper=GripperParams(max_width=0.15)) != []


def test_translation_equivariance():
    """Shifting image content and principal point by 10 px shifts every candidate by 10 px."""
    img, cam, _ = _box_view()
    shifted = np.full_like(img.data, 0.7)
    shifted[:, 10:] = img.data[:, :-10]
    cam2 = CameraModel(cam.fx, cam.fy, cam.cx + 10, cam.cy, cam.width, cam.height, cam.pose)
    a = plan_antipodal(img, cam)
    b = plan_antipodal(DepthImage(shifted), cam2)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert y.u == pytest.approx(x.u + 10, abs=1e-9) and y.v == pytest.approx(x.v, abs=1e-9)
        assert y.angle == pytest.approx(x.angle, abs=1e-9) and y.quality == pytest.approx(x.quality, rel=1e-9)
        assert y.depth == pytest.approx(x.depth, abs=1e-12) and y.width == pytest.approx(x.width, rel=1e-9)


def test_canonical_angle():
    for a in np.linspace(-7, 7, 57):
        c = canonical_angle(a)
        assert -math.pi / 2 <= c < math.pi / 2
        assert c == pytest.approx(canonical_angle(a + math.pi), abs=1e-12)
        assert math.sin(2 * c) == pytest.approx(math.sin(2 * a), abs=1e-12)


def test_lift_at_principal_point_hits_table():
    cam = top_camera(0.7)
    c = lift_grasp(GraspCandidate(cam.cx, cam.cy, 0.0, 0.7, 1.0, 0.03), cam)
    np.testing.assert_allclose(c.position, [0.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(c.approach, [0.0, 0.0, -1.0], atol=1e-12)


def test_lift_round_trip(rng):
    cam = CameraModel(525.0, 525.0, 319.5, 239.5, 640, 480).with_pose(look_at((0.3, -0.4, 0.5), (0, 0, 0)))
    for _ in range(50):
        c = GraspCandidate(rng.uniform(0, 639), rng.uniform(0, 479), rng.uniform(-5, 5), rng.uniform(0.2, 2.0),
                           rng.random(), 0.04)
        g = lift_grasp(c, cam)
        u, v, d = _proj(g.position, cam)
        assert (u, v, d) == pytest.approx((c.u, c.v, c.depth), abs=1e-6)
        assert g.angle == pytest.approx(canonical_angle(c.angle), abs=1e-12)
        R = g.world_pose.matrix
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(g.approach, cam.optical_axis, atol=1e-12)
        # the jaw lies in the image plane along the grasp angle
        a, b = _proj(g.position - 0.01 * g.jaw_axis, cam), _proj(g.position + 0.01 * g.jaw_axis, cam)
        assert abs(canonical_angle(math.atan2(b[1] - a[1], b[0] - a[0]) - g.angle)) < 1e-6


@pytest.mark.parametrize("depth", [0.0, -0.1, float("nan"), float("inf")])
def test_lift_rejects_invalid_depth(depth):
    with pytest.raises(LiftError):
        lift_grasp(GraspCandidate(10.0, 10.0, 0.0, depth, 1.0, 0.03), top_camera())


def _posed(position, approach, jaw=(1.0, 0.0, 0.0), width=0.03):
    approach = np.asarray(approach, float) / np.linalg.norm(approach)
    jaw = np.asarray(jaw, float) - (np.asarray(jaw, float) @ approach) * approach
    jaw /= np.linalg.norm(jaw)
    R = np.column_stack([jaw, np.cross(approach, jaw), approach])
    return GraspCandidate(0, 0, 0, 0.5, 1.0, width, world_pose=Pose.from_matrix(R, position))


def test_reachable_examples():
    ws = WorkspaceModel()
    assert reachable(_posed((0, 0, 0.1), (0, 0, -1)), ws)
    assert not reachable(_posed((2.0, 0, 0.1), (0, 0, -1)), ws)
    # side grasp tilted upwards: its approach line comes from under the table
    g = _posed((0, 0, 0.02), (1, 0, 0.5), jaw=(0, 1, 0))
    back = g.position - GripperParams().sweep_length * g.approach
    assert back[2] < 0.0
    assert not reachable(g, ws)
    # the same approach high above the table is fine
    assert reachable(_posed((0, 0, 0.2), (1, 0, 0), jaw=(0, 1, 0)), ws)
    # approaching from below
    assert not reachable(_posed((0, 0, 0.1), (0, 0, 1)), ws)


def test_reachable_tilt_limit():
    ws = WorkspaceModel(max_tilt_deg=30.0)
    assert reachable(_posed((0, 0, 0.2), (0.3, 0, -1)), ws)
    assert not reachable(_posed((0, 0, 0.2), (1, 0, -0.5)), ws)


def test_reachable_needs_pose():
    with pytest.raises(LiftError):
        reachable(GraspCandidate(0, 0, 0, 0.5, 1.0, 0.03), WorkspaceModel())


def _random_sets(rng, n=None):
    n = n or int(rng.integers(1, 40))
    sets = [[] for _ in range(int(rng.integers(1, 7)))]
    for _ in range(n):
        vp = int(rng.integers(0, len(sets)))
        # coarse values force plenty of exact ties
        sets[vp].append(GraspCandidate(float(rng.integers(0, 4)), float(rng.integers(0, 4)), float(rng.integers(-1, 2)),
                                       0.5, float(rng.integers(0, 5)) / 4, 0.03, vp,
                                       reachable=[None, True, False][int(rng.integers(0, 3))]))
    return sets


def test_select_best_matches_exhaustive_scan(rng):
    checked = 0
    for _ in range(1000):
        sets = _random_sets(rng)
        flat = [c for s in sets for c in s]
        want = argmax_scan(flat)
        if want is None:
            with pytest.raises(NoGraspError):
                select_best(sets)
            continue
        assert select_best(sets) == want
        # monotone rescaling of quality keeps the winner
        rescaled = [[replace(c, quality=math.exp(3 * c.quality) - 7) for c in s] for s in sets]
        assert replace(select_best(rescaled), quality=want.quality) == want
        # set order and order within sets do not matter
        perm = [list(rng.permutation(np.array(s, dtype=object))) for s in sets]
        assert select_best(perm[::-1]).sort_key() == want.sort_key()
        checked += 1
    assert checked > 800


def test_select_best_tie_break_order():
    a = GraspCandidate(5.0, 1.0, 0.0, 0.5, 0.9, 0.03, 1)
    b = GraspCandidate(1.0, 9.0, 0.0, 0.5, 0.9, 0.03, 1)
    c = GraspCandidate(9.0, 9.0, 0.0, 0.5, 0.9, 0.03, 0)
    assert select_best([[a, b, c]]) is c
    assert select_best([[a, b]]) is b
    assert select_best([[a, replace(a, v=0.5)]]).v == 0.5


def test_select_best_no_candidates():
    with pytest.raises(NoGraspError):
        select_best([])
    with pytest.raises(NoGraspError):
        select_best([[GraspCandidate(0, 0, 0, 0.5, 1.0, 0.03, reachable=False)]])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 5)), min_size=1, max_size=30))
def test_select_best_is_max_quality(items):
    cands = [GraspCandidate(float(i), 0.0, 0.0, 0.5, q, 0.03, vp) for i, (q, vp) in enumerate(items)]
    assert select_best([cands]).quality == max(q for q, _ in items)


def test_candidates_csv(tmp_path):
    img, cam, _ = _box_view()
    cands = [lift_grasp(c, cam) for c in plan_antipodal(img, cam, PlannerParams(top_k=3))]
    cands.append(GraspCandidate(1.0, 2.0, 0.0, 0.5, 0.1, 0.02))
    write_candidates_csv(tmp_path / "c.csv", cands)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0].split(",") == CSV_COLUMNS and len(lines) == len(cands) + 1
    assert float(lines[1].split(",")[1]) == cands[0].u
