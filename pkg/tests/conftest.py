import numpy as np
import pytest

from scenegrasp.geometry import CameraModel, Pose, look_at


@pytest.fixture
def small_cam():
    """80x60 camera 1 m above the origin looking straight down."""
    cam = CameraModel(100.0, 100.0, 39.5, 29.5, 80, 60)
    return cam.with_pose(look_at((0.0, 0.0, 1.0), (0.0, 0.0, 0.0), fallback_up=(0.0, 1.0, 0.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def top_camera(height=0.7, intr=None):
    from scenegrasp.viewpoints import default_intrinsics
    intr = intr or default_intrinsics()
    return intr.with_pose(look_at((0.0, 0.0, height), (0.0, 0.0, 0.0), fallback_up=(0.0, 1.0, 0.0)))


def random_pose(rng):
    q = rng.normal(size=4)
    return Pose(q / np.linalg.norm(q), rng.uniform(-1, 1, 3))
