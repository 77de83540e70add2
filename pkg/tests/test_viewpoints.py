import numpy as np
import pytest

from scenegrasp.errors import InvalidArgumentError
from scenegrasp.viewpoints import (RING_POLAR, SAMPLERS, ViewpointSet, default_intrinsics, polar_azimuth,
                                   sample_dodecahedron, sample_top_only)

from .oracles import icosahedron_vertices

CENTER = np.array([0.1, -0.05, 0.03])


def test_six_views_polar_angles():
    vs = sample_dodecahedron(CENTER, 0.7)
    assert len(vs) == 6
    polar = [np.degrees(polar_azimuth(c, CENTER)[0]) for c in vs]
    assert abs(polar[0]) < 1e-6
    for p in polar[1:]:
        assert abs(p - 63.4349488229) < 1e-6


def test_ring_gaps_are_72_degrees():
    vs = sample_dodecahedron(CENTER, 0.7)
    az = np.array([polar_azimuth(c, CENTER)[1] for c in vs.cameras[1:]])
    gaps = np.degrees(np.diff(np.unwrap(az)))
    np.testing.assert_allclose(gaps, 72.0, atol=1e-9)


def test_directions_match_icosahedron_vertex_star():
    """Face midpoints of the dodecahedron = a vertex of the dual icosahedron and its five neighbours."""
    ico = icosahedron_vertices()
    v0 = ico[0]
    star = np.vstack([v0, ico[np.isclose(ico @ v0, 1 / np.sqrt(5))]])
    assert len(star) == 6
    vs = sample_dodecahedron(CENTER, 1.3)
    dirs = np.array([(c.position - CENTER) / 1.3 for c in vs])
    np.testing.assert_allclose(np.sort((dirs @ dirs.T).ravel()), np.sort((star @ star.T).ravel()), atol=1e-12)


def test_cameras_look_at_center_at_radius():
    vs = sample_dodecahedron(CENTER, 0.7)
    for c in vs:
        assert np.linalg.norm(c.position - CENTER) == pytest.approx(0.7, abs=1e-12)
        d = (CENTER - c.position) / 0.7
        np.testing.assert_allclose(c.optical_axis, d, atol=1e-12)


def test_view_zero_is_exact_top_view():
    c = sample_dodecahedron(CENTER, 0.7)[0]
    # exact up to the rounding of a unit quaternion with irrational components
    np.testing.assert_allclose(c.optical_axis, [0.0, 0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(c.position, CENTER + [0, 0, 0.7], atol=0)


def test_top_only_is_view_zero():
    full = sample_dodecahedron(CENTER, 0.7)
    top = sample_top_only(CENTER, 0.7)
    assert len(top) == 1 and top[0] == full[0]
    assert SAMPLERS["top-only"] is sample_top_only


def test_ring_polar_constant():
    assert RING_POLAR == pytest.approx(np.arctan(2.0), abs=1e-15)


def test_tilted_up_vector():
    up = np.array([0.0, 1.0, 1.0]) / np.sqrt(2)
    vs = sample_dodecahedron(np.zeros(3), 1.0, up=up)
    np.testing.assert_allclose(vs[0].position, up, atol=1e-12)
    for c in vs.cameras[1:]:
        assert polar_azimuth(c, np.zeros(3), up=up)[0] == pytest.approx(RING_POLAR, abs=1e-12)


def test_bad_radius_and_reference():
    with pytest.raises(InvalidArgumentError):
        sample_dodecahedron(CENTER, 0.0)
    with pytest.raises(InvalidArgumentError):
        sample_dodecahedron(CENTER, 1.0, azimuth_ref=(0, 0, 1))


def test_round_trip(tmp_path):
    vs = sample_dodecahedron(CENTER, 0.7, intr=default_intrinsics())
    vs.save(tmp_path / "v.json")
    back = ViewpointSet.load(tmp_path / "v.json")
    assert back.cameras == vs.cameras and back.radius == vs.radius
    np.testing.assert_array_equal(back.center, vs.center)
