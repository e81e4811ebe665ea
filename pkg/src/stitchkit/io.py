"""File formats: CSV/PLY point clouds, PGM masks, CSV depth grids, JSON."""

import json
from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement

from .errors import DimensionMismatch


# point clouds
def write_cloud_csv(path, points):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    np.savetxt(path, pts, delimiter=",", header="x,y,z", comments="", fmt="%.9g")


def read_cloud_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().replace(" ", "")
        if header != "x,y,z":
            raise ValueError(f"{path}: expected header 'x,y,z', got {header!r}")
        body = fh.read()
    if not body.strip():
        return np.zeros((0, 3))
    data = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    if data.shape[1] != 3:
        raise DimensionMismatch(f"{path}: expected 3 columns, got {data.shape[1]}")
    return data


def write_cloud_ply(path, points, binary=False):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    vertex = np.empty(len(pts), dtype=[("x", "f4"), ("y", "f4"), ("z", "f4")])
    vertex["x"], vertex["y"], vertex["z"] = pts.T
    PlyData([PlyElement.describe(vertex, "vertex")], text=not binary).write(str(path))


def read_cloud_ply(path):
    ply = PlyData.read(str(path))
    v = ply["vertex"].data
    return np.column_stack([v["x"], v["y"], v["z"]]).astype(float)


def read_cloud(path):
    """Read a cloud by extension (``.csv`` or ``.ply``)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return read_cloud_ply(path)
    if suffix == ".csv":
        return read_cloud_csv(path)
    raise ValueError(f"unsupported cloud format {suffix!r}")


def write_cloud(path, points):
    if Path(path).suffix.lower() == ".ply":
        write_cloud_ply(path, points)
    else:
        write_cloud_csv(path, points)


# rasters
def write_pgm(path, image, binary=True, maxval=None):
    """Write a 2D array as PGM. Boolean masks are stored as 0/255."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise DimensionMismatch("PGM images must be 2D")
    if img.dtype == bool:
        img = img.astype(np.uint8) * 255
    if np.any(img < 0):
        raise ValueError("PGM values must be non-negative")
    img = img.astype(np.int64)
    if maxval is None:
        maxval = 255 if img.max(initial=0) <= 255 else 65535
    if img.max(initial=0) > maxval or maxval > 65535:
        raise ValueError("values exceed PGM maxval")
    h, w = img.shape
    if binary:
        header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
        dtype = ">u2" if maxval > 255 else "u1"
        Path(path).write_bytes(header + img.astype(dtype).tobytes())
    else:
        lines = [f"P2\n{w} {h}\n{maxval}"]
        lines += [" ".join(map(str, row)) for row in img.tolist()]
        Path(path).write_text("\n".join(lines) + "\n")


def _pgm_tokens(data, count, pos):
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        out.append(int(data[start:pos]))
    return out, pos


def read_pgm(path):
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a PGM file")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        img = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    else:
        img = np.array(data[pos:].split(), dtype=np.int64)
        if img.size < w * h:
            raise ValueError(f"{path}: truncated P2 data")
        img = img[:w * h]
    return img.reshape(h, w).astype(np.uint16 if maxval > 255 else np.uint8)


def read_mask(path):
    return read_pgm(path) > 0


def write_depth_csv(path, depth):
    """Depth grid in mm; invalid pixels are written as ``nan``."""
    d = np.asarray(depth, dtype=float)
    if d.ndim != 2:
        raise DimensionMismatch("depth raster must be 2D")
    np.savetxt(path, d, delimiter=",", fmt="%.6g")


def read_depth_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


# json
def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj):
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, default=_default, sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())
