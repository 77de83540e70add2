import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from scenegrasp.errors import BehindCameraError, InvalidArgumentError
from scenegrasp.geometry import (CameraModel, DepthImage, PointCloud, Pose, backproject, depth_to_cloud, look_at,
                                 project, project_points)
from scenegrasp.renderer import SceneEstimate, render_depth

from .conftest import random_pose

CAM = CameraModel(500.0, 480.0, 320.0, 240.0, 640, 480)


def test_backproject_principal_point():
    np.testing.assert_allclose(backproject(320.0, 240.0, 1.5, CAM), [0.0, 0.0, 1.5])


def test_backproject_one_focal_length_off_center():
    wide = CameraModel(500.0, 480.0, 320.0, 240.0, 1000, 480)
    np.testing.assert_allclose(backproject(820.0, 240.0, 1.0, wide), [1.0, 0.0, 1.0])


def test_backproject_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        backproject(10.0, 10.0, 0.0, CAM)
    with pytest.raises(InvalidArgumentError):
        backproject(-1.0, 10.0, 1.0, CAM)


def test_project_examples():
    np.testing.assert_allclose(project((0.0, 0.0, 2.0), CAM), (320.0, 240.0, 2.0))
    np.testing.assert_allclose(project((1.0, 0.0, 1.0), CAM), (820.0, 240.0, 1.0))


def test_project_behind_camera_raises():
    with pytest.raises(BehindCameraError):
        project((0.0, 0.0, -1.0), CAM)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 639), st.floats(0, 479), st.floats(0.05, 10.0))
def test_backproject_project_round_trip(u, v, d):
    pu, pv, pd = project(backproject(u, v, d, CAM), CAM)
    assert abs(pu - u) < 1e-9 and abs(pv - v) < 1e-9 and abs(pd - d) < 1e-9


def test_project_points_matches_scalar(rng):
    pts = np.column_stack([rng.uniform(-1, 1, (50, 2)), rng.uniform(0.2, 3, 50)])
    vec = project_points(pts, CAM)
    for p, row in zip(pts, vec):
        np.testing.assert_allclose(row, project(p, CAM), rtol=0, atol=1e-12)


def test_pose_matrix_matches_scipy(rng):
    for _ in range(20):
        p = random_pose(rng)
        w, x, y, z = p.rotation
        np.testing.assert_allclose(p.matrix, Rotation.from_quat([x, y, z, w]).as_matrix(), atol=1e-12)


def test_pose_compose_and_inverse(rng):
    a, b = random_pose(rng), random_pose(rng)
    pts = rng.normal(size=(10, 3))
    np.testing.assert_allclose((a @ b).apply(pts), a.apply(b.apply(pts)), atol=1e-12)
    np.testing.assert_allclose(a.inverse().apply(a.apply(pts)), pts, atol=1e-12)


def test_pose_dict_round_trip_is_exact(rng):
    for _ in range(50):
        p = Pose.from_matrix(random_pose(rng).matrix, rng.normal(size=3))
        assert Pose.from_dict(p.to_dict()) == p


def test_quaternion_sign_is_canonical():
    q = np.array([0.5, 0.5, 0.5, 0.5])
    assert Pose(-q) == Pose(q)


def test_zero_quaternion_rejected():
    with pytest.raises(InvalidArgumentError):
        Pose(np.zeros(4))


def test_look_at_axes():
    pose = look_at((1.0, 2.0, 3.0), (1.0, 2.0, 0.0), fallback_up=(0.0, 1.0, 0.0))
    R = pose.matrix
    np.testing.assert_allclose(R[:, 2], [0, 0, -1], atol=1e-12)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_camera_dict_round_trip(rng):
    cam = CAM.with_pose(random_pose(rng))
    back = CameraModel.from_dict(cam.to_dict())
    assert back.pose == cam.pose and back.K.tolist() == cam.K.tolist()


def test_depth_to_cloud_all_invalid():
    cam = CameraModel(10.0, 10.0, 2.0, 2.0, 5, 5)
    assert len(depth_to_cloud(DepthImage(np.zeros((5, 5))), cam)) == 0


def test_depth_to_cloud_single_pixel():
    cam = CameraModel(10.0, 10.0, 2.0, 2.0, 5, 5)
    d = np.zeros((5, 5))
    d[2, 2] = 1.0
    cloud = depth_to_cloud(DepthImage(d), cam)
    np.testing.assert_allclose(cloud.points, [[0.0, 0.0, 1.0]])


def test_depth_to_cloud_rendered_plane_lies_on_plane():
    eye = np.array([0.3, -0.4, 0.8])
    cam = CAM.with_pose(look_at(eye, (0.0, 0.0, 0.0)))
    img = render_depth(SceneEstimate(), cam)
    cloud = depth_to_cloud(img, cam)
    assert len(cloud) > 0
    assert np.abs(cloud.points[:, 2]).max() < 1e-6


def test_depth_image_rejects_negative_and_nan():
    with pytest.raises(InvalidArgumentError):
        DepthImage(np.full((2, 2), -1.0))
    with pytest.raises(InvalidArgumentError):
        DepthImage(np.array([[np.nan, 1.0]]))


def test_point_cloud_transform(rng):
    p = random_pose(rng)
    cloud = PointCloud(rng.normal(size=(20, 3)), "camera")
    moved = cloud.transformed(p, "world")
    np.testing.assert_allclose(moved.points, p.apply(cloud.points))
    np.testing.assert_allclose(moved.origin, p.translation)
    assert math.isclose(np.linalg.norm(moved.points[0] - moved.points[1]),
                        np.linalg.norm(cloud.points[0] - cloud.points[1]))
