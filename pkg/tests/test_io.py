import numpy as np
import pytest

from scenegrasp import io
from scenegrasp.errors import BadInputError
from scenegrasp.geometry import CameraModel, DepthImage, PointCloud
from scenegrasp.mesh import box_mesh, icosphere_mesh

from .conftest import random_pose


def test_depth_png_round_trip_is_millimetre_exact(tmp_path, small_cam):
    d = np.round(np.random.default_rng(0).uniform(0, 2, small_cam.shape), 3)
    d[0, :5] = 0.0
    p = tmp_path / "d.png"
    io.write_depth(p, DepthImage(d), small_cam)
    img, cam = io.read_depth(p)
    np.testing.assert_allclose(img.data, d, atol=1e-12)
    assert cam.pose == small_cam.pose and cam.shape == small_cam.shape


def test_depth_png_out_of_range_becomes_invalid():
    q = io.quantize_depth(np.array([[70.0, -1.0, 0.5]]))
    assert q.tolist() == [[0, 0, 500]]


def test_read_depth_shape_mismatch(tmp_path, small_cam):
    p = tmp_path / "d.png"
    io.write_depth_png(p, DepthImage(np.ones((4, 4))))
    io.write_sidecar(tmp_path / "d.json", small_cam)
    with pytest.raises(BadInputError):
        io.read_depth(p)


def test_raw_depth_is_lossless(tmp_path):
    d = np.random.default_rng(1).uniform(0, 2, (7, 9))
    io.write_raw_depth(tmp_path / "d.npy", DepthImage(d))
    assert np.array_equal(io.read_raw_depth(tmp_path / "d.npy").data, d)


@pytest.mark.parametrize("suffix", [".pcd", ".ply"])
def test_cloud_round_trip_is_bit_exact(tmp_path, rng, suffix):
    cloud = PointCloud(rng.normal(size=(100, 3)), "world", rng.normal(size=3))
    p = tmp_path / f"c{suffix}"
    io.write_cloud(p, cloud)
    back = io.read_cloud(p)
    assert np.array_equal(back.points, cloud.points)
    assert np.array_equal(back.origin, cloud.origin)
    assert back.frame == "world"


def test_empty_cloud_round_trip(tmp_path):
    for suffix in (".pcd", ".ply"):
        io.write_cloud(tmp_path / f"e{suffix}", PointCloud(np.zeros((0, 3))))
        assert len(io.read_cloud(tmp_path / f"e{suffix}")) == 0


def test_unsupported_cloud_format(tmp_path):
    with pytest.raises(BadInputError):
        io.read_cloud(tmp_path / "c.xyz")


def test_obj_round_trip_is_bit_exact(tmp_path, rng):
    m = icosphere_mesh(0.1, 2).transformed(random_pose(rng))
    io.write_obj(tmp_path / "m.obj", m.vertices, m.triangles)
    v, t = io.read_obj(tmp_path / "m.obj")
    assert np.array_equal(v, m.vertices) and np.array_equal(t, m.triangles)


def test_stl_round_trip_float32(tmp_path):
    m = box_mesh((0.1, 0.2, 0.3))
    io.write_stl(tmp_path / "m.stl", m.vertices, m.triangles)
    v, t = io.read_stl(tmp_path / "m.stl")
    assert len(v) == 8 and len(t) == 12
    np.testing.assert_allclose(np.sort(v, axis=0), np.sort(m.vertices, axis=0), atol=1e-7)
    np.testing.assert_allclose(v[t].reshape(-1, 3).sum(axis=0), m.vertices[m.triangles].reshape(-1, 3).sum(axis=0),
                               atol=1e-5)


def test_ply_mesh_round_trip(tmp_path):
    m = box_mesh((0.1, 0.1, 0.1))
    io.write_ply(tmp_path / "m.ply", m.vertices, m.triangles)
    v, t = io.read_mesh(tmp_path / "m.ply")
    assert np.array_equal(v, m.vertices) and np.array_equal(t, m.triangles)


def test_truncated_stl(tmp_path):
    (tmp_path / "bad.stl").write_bytes(b"x" * 20)
    with pytest.raises(BadInputError):
        io.read_stl(tmp_path / "bad.stl")


def test_rle_round_trip(rng):
    for _ in range(20):
        flat = rng.random(500) < rng.random()
        assert np.array_equal(io.decode_rle(io.encode_rle(flat), flat.size), flat)


def test_grid_rle_file(tmp_path, rng):
    occ = rng.random((8, 8, 8))
    io.write_grid_rle(tmp_path / "g.json", occ, 0.01, (1.0, 2.0, 3.0))
    back, vs, origin = io.read_grid_rle(tmp_path / "g.json")
    assert np.array_equal(back, occ >= 0.5) and vs == 0.01 and origin.tolist() == [1.0, 2.0, 3.0]


def test_bad_sidecar(tmp_path):
    (tmp_path / "s.json").write_text("{}")
    with pytest.raises(BadInputError):
        io.read_sidecar(tmp_path / "s.json")


def test_sidecar_keeps_intrinsics(tmp_path):
    cam = CameraModel(600.0, 610.0, 300.5, 200.5, 640, 400)
    io.write_sidecar(tmp_path / "s.json", cam)
    back, doc = io.read_sidecar(tmp_path / "s.json")
    assert back.K.tolist() == cam.K.tolist() and doc["depth_scale"] == io.DEPTH_SCALE
