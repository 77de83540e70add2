import numpy as np
import pytest

from scenegrasp.errors import InvalidArgumentError
from scenegrasp.filtering import WorkspaceModel, filter_cloud, keep_mask, refine_plane
from scenegrasp.geometry import PointCloud, depth_to_cloud
from scenegrasp.harness.scenes import SceneSpec, generate_scene
from scenegrasp.renderer import render_depth


def test_point_beyond_background_depth_removed():
    ws = WorkspaceModel(background_depth=1.0)
    cloud = PointCloud([[0.0, 0.0, 1.01], [0.0, 0.0, 0.5]], origin=(0.0, 0.0, 0.0))
    assert filter_cloud(cloud, ws).points.tolist() == [[0.0, 0.0, 0.5]]


def test_point_on_plane_removed():
    cloud = PointCloud([[0.1, 0.2, 0.0], [0.1, 0.2, 0.05]], origin=(0.0, 0.0, 1.0))
    assert filter_cloud(cloud, WorkspaceModel()).points.tolist() == [[0.1, 0.2, 0.05]]


def test_box_on_plane_matches_per_point_recheck():
    truth, cam = generate_scene(SceneSpec(("cube",), camera_elevation=60.0))
    cloud = depth_to_cloud(render_depth(truth, cam), cam)
    ws = WorkspaceModel()
    out = filter_cloud(cloud, ws)
    expected = [p for p in cloud.points
                if abs(p[2]) > ws.plane_tolerance and np.linalg.norm(p - cloud.origin) <= ws.background_depth]
    assert len(out) == len(expected) > 0
    assert np.array_equal(out.points, np.array(expected))


def test_filter_keeps_order_and_is_subset(rng):
    pts = rng.uniform(-0.3, 0.3, (500, 3))
    cloud = PointCloud(pts, origin=(0.0, 0.0, 1.0))
    m = keep_mask(cloud, WorkspaceModel())
    assert np.array_equal(filter_cloud(cloud, WorkspaceModel()).points, pts[m])


def test_camera_frame_rejected():
    with pytest.raises(InvalidArgumentError):
        filter_cloud(PointCloud(np.zeros((1, 3)), "camera"), WorkspaceModel())


def test_workspace_validation():
    with pytest.raises(InvalidArgumentError):
        WorkspaceModel(plane_normal=(0.0, 0.0, 0.0))
    with pytest.raises(InvalidArgumentError):
        WorkspaceModel(plane_tolerance=0.0)
    assert WorkspaceModel(plane_normal=(0.0, 0.0, 2.0)).plane_normal == (0.0, 0.0, 1.0)


def test_refine_plane_recovers_tilted_table(rng):
    n = np.array([0.02, -0.01, 1.0])
    n /= np.linalg.norm(n)
    xy = rng.uniform(-0.4, 0.4, (2000, 2))
    z = (0.003 - n[0] * xy[:, 0] - n[1] * xy[:, 1]) / n[2]
    cloud = PointCloud(np.column_stack([xy, z]), origin=(0.0, 0.0, 1.0))
    ws = refine_plane(cloud, WorkspaceModel())
    np.testing.assert_allclose(ws.normal, n, atol=1e-9)
    assert ws.plane_offset == pytest.approx(0.003, abs=1e-9)
