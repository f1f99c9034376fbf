"""Minimal PLY reader/writer for voxelized geometry (x, y, z only)."""

from __future__ import annotations

import io
import os
from typing import BinaryIO, Union

import numpy as np

from .geometry import MAX_DEPTH, VoxelCloud, depth_for

PathOrStream = Union[str, os.PathLike, BinaryIO]

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_FORMATS = {"ascii", "binary_little_endian"}


class PlyError(ValueError):
    pass


def _read_header(stream: BinaryIO):
    magic = stream.readline().strip()
    if magic != b"ply":
        raise PlyError("missing 'ply' magic line")
    fmt = None
    elements = []  # [name, count, [(prop_name, dtype or None for list)]]
    while True:
        raw = stream.readline()
        if not raw:
            raise PlyError("header ended without end_header")
        tokens = raw.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "end_header":
            break
        if key == "format":
            if len(tokens) < 2 or tokens[1] not in _FORMATS:
                raise PlyError(f"unsupported format line: {raw!r}")
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise PlyError(f"malformed element line: {raw!r}")
            elements.append([tokens[1], int(tokens[2]), []])
        elif key == "property":
            if not elements:
                raise PlyError("property declared before any element")
            if len(tokens) >= 2 and tokens[1] == "list":
                if len(tokens) != 5:
                    raise PlyError(f"malformed list property: {raw!r}")
                elements[-1][2].append((tokens[4], None, (tokens[2], tokens[3])))
            else:
                if len(tokens) != 3 or tokens[1] not in _PLY_TYPES:
                    raise PlyError(f"malformed property line: {raw!r}")
                elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]], None))
        else:
            raise PlyError(f"unknown header keyword {key!r}")
    if fmt is None:
        raise PlyError("header has no format line")
    return fmt, elements


def _skip_binary_element(stream: BinaryIO, count: int, props) -> None:
    if all(dt is not None for _, dt, _ in props):
        stream.read(count * sum(np.dtype(dt).itemsize for _, dt, _ in props))
        return
    for _ in range(count):
        for _, dt, lst in props:
            if dt is not None:
                stream.read(np.dtype(dt).itemsize)
            else:
                count_dt = np.dtype(_PLY_TYPES[lst[0]]).newbyteorder("<")
                n = int(np.frombuffer(stream.read(count_dt.itemsize), count_dt)[0])
                stream.read(n * np.dtype(_PLY_TYPES[lst[1]]).itemsize)


def _read_vertices(stream: BinaryIO) -> np.ndarray:
    fmt, elements = _read_header(stream)
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise PlyError("no vertex element")
    vi = names.index("vertex")
    _, count, props = elements[vi]
    prop_names = [p[0] for p in props]
    if not {"x", "y", "z"} <= set(prop_names):
        raise PlyError("vertex element lacks x, y, z properties")
    if any(dt is None for _, dt, _ in props):
        raise PlyError("list properties on vertices are not supported")
    cols = [prop_names.index(c) for c in "xyz"]

    if fmt == "ascii":
        lines = stream.read().decode("ascii", errors="replace").splitlines()
        rows = [ln for ln in lines if ln.strip()]
        # elements before the vertex element occupy one line per item
        start = sum(e[1] for e in elements[:vi])
        rows = rows[start:start + count]
        if len(rows) < count:
            raise PlyError(f"expected {count} vertex rows, found {len(rows)}")
        if count == 0:
            return np.zeros((0, 3))
        try:
            table = np.array([r.split()[: len(props)] for r in rows], dtype=np.float64)
        except ValueError as exc:
            raise PlyError(f"malformed vertex row: {exc}") from exc
        if table.ndim != 2 or table.shape[1] != len(props):
            raise PlyError("vertex rows do not match the declared properties")
        return table[:, cols]

    for name, n, eprops in elements[:vi]:
        _skip_binary_element(stream, n, eprops)
    dtype = np.dtype([(name, "<" + dt) for name, dt, _ in props])
    buf = stream.read(count * dtype.itemsize)
    if len(buf) < count * dtype.itemsize:
        raise PlyError("truncated binary vertex data")
    data = np.frombuffer(buf, dtype=dtype, count=count)
    return np.stack([data[c].astype(np.float64) for c in "xyz"], axis=1) if count else np.zeros((0, 3))


def load_ply(source: PathOrStream, depth: int | None = None) -> VoxelCloud:
    """Read a PLY file into a VoxelCloud.

    Coordinates are rounded half-up, clamped to ``[0, 2**depth - 1]`` and
    deduplicated. Without ``depth`` the smallest fitting depth is inferred.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            xyz = _read_vertices(fh)
    else:
        xyz = _read_vertices(source)

    if not np.all(np.isfinite(xyz)):
        raise PlyError("non-finite vertex coordinates")
    v = np.floor(xyz + 0.5)
    if len(v) and v.max() >= 1 << MAX_DEPTH:
        raise PlyError(f"coordinate {v.max():.0f} exceeds the {MAX_DEPTH}-bit depth cap")
    v = np.maximum(v, 0).astype(np.int64)
    if depth is None:
        depth = depth_for(int(v.max()) if len(v) else 0)
    v = np.minimum(v, (1 << depth) - 1)
    return VoxelCloud(v, depth=depth)


def _narrowest_type(max_coord: int) -> str:
    if max_coord < 1 << 8:
        return "uchar"
    if max_coord < 1 << 16:
        return "ushort"
    return "uint"


def save_ply(cloud: VoxelCloud, dest: PathOrStream | None = None, format: str = "binary") -> bytes:
    """Serialize ``cloud``; writes to ``dest`` when given and returns the bytes."""
    if format not in ("ascii", "binary"):
        raise PlyError(f"unknown PLY format {format!r}")
    pts = cloud.points
    ptype = _narrowest_type(int(pts.max()) if len(pts) else 0)
    ply_format = "ascii" if format == "ascii" else "binary_little_endian"
    header = [
        "ply",
        f"format {ply_format} 1.0",
        f"element vertex {len(pts)}",
        f"property {ptype} x",
        f"property {ptype} y",
        f"property {ptype} z",
        "end_header",
    ]
    out = io.BytesIO()
    out.write(("\n".join(header) + "\n").encode("ascii"))
    if format == "ascii":
        np.savetxt(out, pts, fmt="%d")
    else:
        out.write(pts.astype("<" + _PLY_TYPES[ptype]).tobytes())
    data = out.getvalue()

    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as fh:
            fh.write(data)
    elif dest is not None:
        dest.write(data)
    return data
