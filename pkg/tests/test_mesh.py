import numpy as np
import pytest

from scenegrasp.errors import InvalidArgumentError
from scenegrasp.geometry import Pose
from scenegrasp.mesh import TriangleMesh, box_mesh, cylinder_mesh, icosphere_mesh, merge_meshes

from .conftest import random_pose


@pytest.mark.parametrize("mesh", [box_mesh((0.1, 0.2, 0.3)), cylinder_mesh(0.03, 0.1), icosphere_mesh(0.05, 2)],
                         ids=["box", "cylinder", "icosphere"])
def test_primitives_closed_and_outward(mesh):
    assert mesh.is_watertight() and mesh.is_consistently_oriented()
    assert mesh.euler_characteristic() == 2
    assert not mesh.has_degenerate()
    assert mesh.volume() > 0


def test_box_measures():
    m = box_mesh((0.1, 0.2, 0.3))
    assert m.volume() == pytest.approx(0.006, rel=1e-12)
    assert m.area() == pytest.approx(2 * (0.02 + 0.03 + 0.06), rel=1e-12)
    lo, hi = m.bounds()
    np.testing.assert_allclose(hi, [0.05, 0.1, 0.15])
    np.testing.assert_allclose(lo, -hi)


def test_cylinder_volume_approaches_analytic():
    # inscribed polygon area: n/2 r^2 sin(2 pi / n)
    n, r, h = 48, 0.03, 0.1
    assert cylinder_mesh(r, h, n).volume() == pytest.approx(0.5 * n * r * r * np.sin(2 * np.pi / n) * h, rel=1e-12)


def test_icosphere_vertices_on_sphere():
    m = icosphere_mesh(0.07, 3)
    np.testing.assert_allclose(np.linalg.norm(m.vertices, axis=1), 0.07, rtol=1e-12)
    assert len(m) == 20 * 4 ** 3


def test_rigid_transform_preserves_measures(rng):
    m = box_mesh((0.1, 0.05, 0.02))
    for _ in range(5):
        t = m.transformed(random_pose(rng))
        assert t.volume() == pytest.approx(m.volume(), rel=1e-9)
        assert t.area() == pytest.approx(m.area(), rel=1e-9)
        assert t.is_watertight()


def test_transformed_records_pose():
    p = Pose.from_axis_angle((0, 0, 1), 0.3, (1.0, 0.0, 0.0))
    m = box_mesh((1, 1, 1)).transformed(p)
    assert m.pose == p
    np.testing.assert_allclose(m.centroid(), [1.0, 0.0, 0.0], atol=1e-12)


def test_open_mesh_not_watertight():
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert not m.is_watertight()
    assert not TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))).is_watertight()


def test_flipped_face_breaks_orientation():
    m = box_mesh((1, 1, 1))
    t = m.triangles.copy()
    t[0] = t[0, ::-1]
    assert m.is_consistently_oriented()
    assert not TriangleMesh(m.vertices, t).is_consistently_oriented()


def test_index_out_of_range():
    with pytest.raises(InvalidArgumentError):
        TriangleMesh(np.zeros((3, 3)), [[0, 1, 3]])


def test_cleaned_drops_degenerate_and_unused():
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2], [0, 0, 1]])
    c = m.cleaned()
    assert len(c) == 1 and len(c.vertices) == 3


def test_merge_meshes_offsets():
    a, b = box_mesh((1, 1, 1)), icosphere_mesh(1.0, 0)
    v, t, owner = merge_meshes([a, b])
    assert len(v) == 8 + 12 and len(t) == 12 + 20
    assert owner.tolist() == [0] * 12 + [1] * 20
    np.testing.assert_array_equal(v[t[12:]], b.corners)
    v, t, owner = merge_meshes([])
    assert v.shape == (0, 3) and t.shape == (0, 3) and owner.shape == (0,)
