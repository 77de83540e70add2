"""Readers and writers for the interchange formats.

* depth: 16-bit PNG, millimeter units, plus a JSON sidecar with intrinsics and pose
* clouds: ASCII PCD, binary little-endian PLY (double precision)
* meshes: binary STL, ASCII OBJ (full float precision), PLY with faces
* voxel grids: JSON header with run-length encoded binary occupancy
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import BadInputError
from .geometry import CameraModel, DepthImage, PointCloud, Pose

DEPTH_SCALE = 0.001  # meters per PNG count


# -- depth -----------------------------------------------------------------

def quantize_depth(data: np.ndarray, scale: float = DEPTH_SCALE) -> np.ndarray:
    counts = np.rint(np.asarray(data, dtype=np.float64) / scale)
    counts[(counts > 65535) | (counts < 0)] = 0
    return counts.astype(np.uint16)


def write_depth_png(path, img: DepthImage, scale: float = DEPTH_SCALE) -> None:
    Image.fromarray(quantize_depth(img.data, scale)).save(path, format="PNG")


def read_depth_png(path, scale: float = DEPTH_SCALE) -> DepthImage:
    try:
        with Image.open(path) as im:
            counts = np.array(im, dtype=np.int64)
    except (OSError, ValueError) as exc:
        raise BadInputError(f"cannot read depth PNG {path}: {exc}") from exc
    if counts.ndim != 2:
        raise BadInputError(f"{path} is not a single-channel depth image")
    return DepthImage(counts.astype(np.float64) * scale)


def write_sidecar(path, cam: CameraModel, depth_file: str | None = None, scale: float = DEPTH_SCALE) -> None:
    doc = {**cam.to_dict(), "depth_scale": scale}
    if depth_file is not None:
        doc["depth_file"] = depth_file
    Path(path).write_text(json.dumps(doc, indent=2))


def read_sidecar(path) -> tuple[CameraModel, dict]:
    try:
        doc = json.loads(Path(path).read_text())
        return CameraModel.from_dict(doc), doc
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise BadInputError(f"invalid camera sidecar {path}: {exc}") from exc


def write_depth(png_path, img: DepthImage, cam: CameraModel) -> Path:
    """Write ``<name>.png`` and ``<name>.json`` side by side; returns the sidecar path."""
    png_path = Path(png_path)
    write_depth_png(png_path, img)
    sidecar = png_path.with_suffix(".json")
    write_sidecar(sidecar, cam, png_path.name)
    return sidecar


def read_depth(png_path, sidecar_path=None) -> tuple[DepthImage, CameraModel]:
    png_path = Path(png_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else png_path.with_suffix(".json")
    cam, doc = read_sidecar(sidecar_path)
    img = read_depth_png(png_path, doc.get("depth_scale", DEPTH_SCALE))
    if not img.matches(cam):
        raise BadInputError(f"depth image {img.shape} does not match sidecar {cam.shape}")
    return img, cam


def write_raw_depth(path, img: DepthImage) -> None:
    """Lossless float64 dump (``.npy``)."""
    np.save(path, np.asarray(img.data))


def read_raw_depth(path) -> DepthImage:
    return DepthImage(np.load(path))


# -- point clouds ----------------------------------------------------------

def write_pcd(path, cloud: PointCloud) -> None:
    n = len(cloud)
    ox, oy, oz = (float(c) for c in cloud.origin)
    lines = [
        "# .PCD v0.7 - Point Cloud Data file format",
        f"# frame {cloud.frame}",
        "VERSION 0.7",
        "FIELDS x y z",
        "SIZE 8 8 8",
        "TYPE F F F",
        "COUNT 1 1 1",
        f"WIDTH {n}",
        "HEIGHT 1",
        f"VIEWPOINT {ox!r} {oy!r} {oz!r} 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in cloud.points.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pcd(path) -> PointCloud:
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise BadInputError(f"cannot read PCD {path}: {exc}") from exc
    header = {}
    frame = "world"
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "frame":
                frame = parts[1]
            continue
        key, _, rest = line.partition(" ")
        header[key] = rest.split()
        if key == "DATA":
            body = lines[i + 1:]
            break
    else:
        raise BadInputError(f"{path}: missing DATA line")
    if header["DATA"] != ["ascii"]:
        raise BadInputError(f"{path}: only ascii PCD is supported")
    fields = header.get("FIELDS", [])
    try:
        cols = [fields.index(c) for c in "xyz"]
    except ValueError as exc:
        raise BadInputError(f"{path}: PCD lacks x/y/z fields") from exc
    n = int(header.get("POINTS", ["0"])[0])
    rows = [r.split() for r in body if r.strip()]
    if len(rows) != n:
        raise BadInputError(f"{path}: expected {n} points, found {len(rows)}")
    pts = np.array([[float(r[c]) for c in cols] for r in rows], dtype=np.float64).reshape(-1, 3)
    vp = [float(x) for x in header.get("VIEWPOINT", ["0", "0", "0"])[:3]]
    return PointCloud(pts, frame, vp)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def write_ply(path, points: np.ndarray, triangles: np.ndarray | None = None,
              frame: str = "world", origin=(0.0, 0.0, 0.0)) -> None:
    points = np.asarray(points, dtype="<f8").reshape(-1, 3)
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"comment frame {frame}",
        "comment origin " + " ".join(repr(float(c)) for c in origin),
        f"element vertex {len(points)}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if triangles is not None:
        header += [f"element face {len(triangles)}", "property list uchar int vertex_indices"]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(points.tobytes())
        if triangles is not None:
            faces = np.zeros(len(triangles), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
            faces["n"] = 3
            faces["idx"] = triangles
            fh.write(faces.tobytes())


def read_ply(path) -> tuple[np.ndarray, np.ndarray | None, str, np.ndarray]:
    """Returns (points, triangles or None, frame, origin)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise BadInputError(f"cannot read PLY {path}: {exc}") from exc
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise BadInputError(f"{path}: not a PLY file")
    header = raw[:end].decode("ascii").splitlines()
    body = raw[end + len(b"end_header\n"):]
    frame, origin = "world", np.zeros(3)
    elements: list[tuple[str, int, list]] = []
    fmt = None
    for line in header:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "comment" and len(parts) >= 3 and parts[1] == "frame":
            frame = parts[2]
        elif parts[0] == "comment" and len(parts) == 5 and parts[1] == "origin":
            origin = np.array([float(x) for x in parts[2:]])
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            elements[-1][2].append(parts[1:])
    if fmt != "binary_little_endian":
        raise BadInputError(f"{path}: only binary_little_endian PLY is supported")
    points = np.zeros((0, 3))
    triangles = None
    offset = 0
    for name, count, props in elements:
        if any(p[0] == "list" for p in props):
            if len(props) != 1:
                raise BadInputError(f"{path}: unsupported face layout")
            _, ctype, itype, _ = props[0]
            dt = np.dtype([("n", "<" + _PLY_TYPES[ctype]), ("idx", "<" + _PLY_TYPES[itype], (3,))])
            arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            if count and np.any(arr["n"] != 3):
                raise BadInputError(f"{path}: only triangle faces are supported")
            offset += dt.itemsize * count
            if name == "face":
                triangles = arr["idx"].astype(np.int64)
        else:
            dt = np.dtype([(p[1], "<" + _PLY_TYPES[p[0]]) for p in props])
            arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            offset += dt.itemsize * count
            if name == "vertex":
                points = np.column_stack([arr[c].astype(np.float64) for c in "xyz"]) if count else np.zeros((0, 3))
    return points, triangles, frame, origin


def write_cloud(path, cloud: PointCloud) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pcd":
        write_pcd(path, cloud)
    else:
        write_ply(path, cloud.points, frame=cloud.frame, origin=cloud.origin)


def read_cloud(path) -> PointCloud:
    path = Path(path)
    if path.suffix.lower() == ".pcd":
        return read_pcd(path)
    if path.suffix.lower() == ".ply":
        pts, _, frame, origin = read_ply(path)
        return PointCloud(pts, frame, origin)
    raise BadInputError(f"unsupported cloud format: {path.suffix}")


# -- meshes ----------------------------------------------------------------

def write_stl(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    tri = np.asarray(vertices, dtype=np.float64)[np.asarray(triangles)]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
    rec = np.zeros(len(tri), dtype=[("n", "<f4", (3,)), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    rec["n"] = n
    rec["v"] = tri
    with open(path, "wb") as fh:
        fh.write(b"scenegrasp binary STL".ljust(80, b" "))
        fh.write(struct.pack("<I", len(tri)))
        fh.write(rec.tobytes())


def read_stl(path) -> tuple[np.ndarray, np.ndarray]:
    """Binary STL reader; vertices are merged on exact float32 equality."""
    raw = Path(path).read_bytes()
    if len(raw) < 84:
        raise BadInputError(f"{path}: truncated STL")
    (count,) = struct.unpack("<I", raw[80:84])
    dt = np.dtype([("n", "<f4", (3,)), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    if len(raw) != 84 + count * dt.itemsize:
        raise BadInputError(f"{path}: not a binary STL")
    rec = np.frombuffer(raw, dtype=dt, count=count, offset=84)
    corners = rec["v"].reshape(-1, 3)
    verts, inverse = np.unique(corners, axis=0, return_inverse=True)
    return verts.astype(np.float64), inverse.reshape(-1, 3).astype(np.int64)


def write_obj(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in np.asarray(vertices, dtype=np.float64).tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(triangles).tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise BadInputError(f"cannot read OBJ {path}: {exc}") from exc
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            # fan-triangulate polygons
            faces += [[idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1)]
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def read_mesh(path) -> tuple[np.ndarray, np.ndarray]:
    suffix = Path(path).suffix.lower()
    if suffix == ".stl":
        return read_stl(path)
    if suffix == ".obj":
        return read_obj(path)
    if suffix == ".ply":
        pts, tris, _, _ = read_ply(path)
        if tris is None:
            raise BadInputError(f"{path}: PLY has no faces")
        return pts, tris
    raise BadInputError(f"unsupported mesh format: {suffix}")


# -- voxel grids -----------------------------------------------------------

def encode_rle(flat: np.ndarray) -> list[int]:
    """Run lengths of a boolean vector, starting with a (possibly empty) run of False."""
    flat = np.asarray(flat, dtype=bool)
    change = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return runs


def decode_rle(runs: list[int], size: int) -> np.ndarray:
    out = np.zeros(size, dtype=bool)
    pos, value = 0, False
    for r in runs:
        if value:
            out[pos:pos + r] = True
        pos += r
        value = not value
    if pos != size:
        raise BadInputError(f"RLE covers {pos} cells, expected {size}")
    return out


def write_grid_rle(path, occupancy: np.ndarray, voxel_size: float, origin, threshold: float = 0.5) -> None:
    occ = np.asarray(occupancy)
    doc = {
        "dims": list(occ.shape),
        "voxel_size": float(voxel_size),
        "origin": [float(c) for c in origin],
        "threshold": threshold,
        "order": "C",
        "rle": encode_rle((occ >= threshold).ravel()),
    }
    Path(path).write_text(json.dumps(doc))


def read_grid_rle(path) -> tuple[np.ndarray, float, np.ndarray]:
    doc = json.loads(Path(path).read_text())
    dims = tuple(doc["dims"])
    occ = decode_rle(doc["rle"], int(np.prod(dims))).reshape(dims).astype(np.float64)
    return occ, float(doc["voxel_size"]), np.array(doc["origin"], dtype=np.float64)
