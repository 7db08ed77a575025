"""Readers and writers for OBJ, PLY and STL meshes plus PLY point tables."""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ParseError
from .mesh import TriMesh, make_mesh

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_mesh(path, format: str | None = None) -> TriMesh:
    """Load a triangle mesh from an OBJ, PLY or STL file.

    ``format`` defaults to the file extension. Polygons are fan-triangulated.
    Raises :class:`ParseError` on malformed input and
    :class:`~sharpedges.errors.DegenerateMesh` on meshes without usable faces.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    data = path.read_bytes()
    if not data.strip():
        raise ParseError(f"{path}: empty file")
    if fmt == "obj":
        v, f, n = _parse_obj(data.decode("utf-8", errors="replace"))
    elif fmt == "ply":
        v, f, n = _mesh_from_ply(read_ply(data))
    elif fmt == "stl":
        v, f = _parse_stl(data)
        n = None
    else:
        raise ParseError(f"unknown mesh format {fmt!r}")
    if len(v) == 0:
        raise ParseError(f"{path}: no vertices")
    return make_mesh(v, f, n)


def _parse_obj(text):
    verts, normals, faces = [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "vn":
                normals.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for p in parts[1:]:
                    k = int(p.split("/")[0])
                    idx.append(k - 1 if k > 0 else len(verts) + k)
                if len(idx) < 3:
                    raise ValueError("face with fewer than 3 vertices")
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    if any(len(v) != 3 for v in verts):
        raise ParseError("vertex with fewer than 3 coordinates")
    v = np.array(verts, float).reshape(-1, 3)
    f = np.array(faces, np.int64).reshape(-1, 3)
    if len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise ParseError("face index out of range")
    # per-vertex normals are only trusted when they align one-to-one
    n = np.array(normals, float) if len(normals) == len(verts) and normals else None
    return v, f, n


def _parse_stl(data: bytes):
    head = data[:512].lstrip().lower()
    if head.startswith(b"solid") and b"facet" in data[:4096]:
        tri = _parse_stl_ascii(data.decode("ascii", errors="replace"))
    else:
        if len(data) < 84:
            raise ParseError("truncated binary STL")
        (count,) = struct.unpack("<I", data[80:84])
        if len(data) < 84 + 50 * count:
            raise ParseError("truncated binary STL")
        rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        tri = np.frombuffer(data, rec, count=count, offset=84)["v"].astype(float)
    if len(tri) == 0:
        raise ParseError("STL without facets")
    return weld(tri.reshape(-1, 3), np.arange(3 * len(tri)).reshape(-1, 3))


def _parse_stl_ascii(text):
    pts = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            try:
                pts.append([float(p) for p in parts[1:4]])
            except ValueError as exc:
                raise ParseError(str(exc)) from None
    if len(pts) % 3:
        raise ParseError("ASCII STL vertex count not a multiple of 3")
    return np.array(pts, float).reshape(-1, 3, 3)


def weld(vertices, faces, rel_tol: float = 1e-7):
    """Merge vertices closer than ``rel_tol`` times the bounding-box diagonal."""
    v = np.asarray(vertices, float)
    diag = float(np.linalg.norm(v.max(0) - v.min(0))) if len(v) else 0.0
    tol = rel_tol * diag
    if tol <= 0:
        tol = 1e-300
    pairs = cKDTree(v).query_pairs(tol, output_type="ndarray")
    g = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(v), len(v)))
    _, labels = connected_components(g, directed=False)
    # representative of each group is its lowest original index
    first = np.full(labels.max() + 1, len(v))
    np.minimum.at(first, labels, np.arange(len(v)))
    keep = np.sort(first)
    remap = np.empty(labels.max() + 1, np.int64)
    remap[np.argsort(first)] = np.arange(len(keep))
    return v[keep], remap[labels][np.asarray(faces)]


# ---------------------------------------------------------------- PLY

def read_ply(source) -> dict:
    """Parse a PLY file into ``{"elements": {name: {prop: array}}, "comments": [...]}``.

    List properties become Python lists of arrays unless every row has the
    same length, in which case they are returned as a 2D array.
    """
    data = source if isinstance(source, (bytes, bytearray)) else Path(source).read_bytes()
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file")
    nl = data.find(b"\n", end)
    body = data[nl + 1:] if nl >= 0 else b""
    header = data[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements = []
    comments = []
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "comment":
            comments.append(line[len("comment"):].strip())
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element")
            try:
                if parts[1] == "list":
                    elements[-1][2].append((parts[4], _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]]))
                else:
                    elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]], None))
            except (KeyError, IndexError):
                raise ParseError(f"bad property line {line!r}") from None
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"unsupported PLY format {fmt!r}")
    out = {}
    if fmt == "ascii":
        tokens = body.split()
        pos = 0
        for name, count, props in elements:
            out[name], pos = _ply_ascii_element(tokens, pos, count, props)
    else:
        bo = "<" if fmt == "binary_little_endian" else ">"
        pos = 0
        for name, count, props in elements:
            out[name], pos = _ply_binary_element(body, pos, count, props, bo)
    return {"elements": out, "comments": comments}


def _ply_ascii_element(tokens, pos, count, props):
    cols = {p[0]: [] for p in props}
    try:
        for _ in range(count):
            for name, t, item in props:
                if item is None:
                    cols[name].append(float(tokens[pos]))
                    pos += 1
                else:
                    k = int(tokens[pos])
                    cols[name].append([float(x) for x in tokens[pos + 1:pos + 1 + k]])
                    if len(cols[name][-1]) != k:
                        raise IndexError
                    pos += 1 + k
    except (IndexError, ValueError):
        raise ParseError("truncated or malformed ASCII PLY body") from None
    res = {}
    for name, t, item in props:
        if item is None:
            res[name] = np.array(cols[name], dtype=t)
        else:
            res[name] = _pack_lists([np.array(r, dtype=item) for r in cols[name]])
    return res, pos


def _pack_lists(rows):
    if rows and all(len(r) == len(rows[0]) for r in rows):
        return np.array(rows).reshape(len(rows), len(rows[0]))
    return rows


def _ply_binary_element(body, pos, count, props, bo):
    if all(item is None for _, _, item in props):
        dt = np.dtype([(name, bo + t) for name, t, _ in props])
        if pos + dt.itemsize * count > len(body):
            raise ParseError("truncated binary PLY body")
        arr = np.frombuffer(body, dt, count=count, offset=pos)
        return {name: arr[name].astype(arr[name].dtype.newbyteorder("=")) for name, _, _ in props}, \
            pos + dt.itemsize * count
    # fast path: a single list property of constant length preceded by scalars
    fields = []
    try:
        probe = pos
        for name, t, item in props:
            if item is None:
                fields.append((name, bo + t))
                probe += np.dtype(t).itemsize
            else:
                (k,) = np.frombuffer(body, bo + t, count=1, offset=probe)
                fields.append((name + "__n", bo + t))
                fields.append((name, bo + item, (int(k),)))
                probe += np.dtype(t).itemsize + int(k) * np.dtype(item).itemsize
        dt = np.dtype(fields)
        if pos + dt.itemsize * count <= len(body):
            arr = np.frombuffer(body, dt, count=count, offset=pos)
            if all((arr[n + "__n"] == arr[n].shape[1]).all() for n, _, it in props if it is not None):
                res = {n: np.ascontiguousarray(arr[n]).astype(arr[n].dtype.newbyteorder("="))
                       for n, _, _ in props}
                return res, pos + dt.itemsize * count
    except ValueError:
        pass
    cols = {p[0]: [] for p in props}
    try:
        for _ in range(count):
            for name, t, item in props:
                size = np.dtype(t).itemsize
                (val,) = np.frombuffer(body, bo + t, count=1, offset=pos)
                pos += size
                if item is None:
                    cols[name].append(val)
                else:
                    isz = np.dtype(item).itemsize
                    cols[name].append(np.frombuffer(body, bo + item, count=int(val), offset=pos).astype(item))
                    pos += int(val) * isz
    except ValueError:
        raise ParseError("truncated binary PLY body") from None
    res = {}
    for name, t, item in props:
        res[name] = np.array(cols[name], dtype=t) if item is None else _pack_lists(cols[name])
    return res, pos


def _mesh_from_ply(ply):
    el = ply["elements"]
    if "vertex" not in el:
        raise ParseError("PLY without vertex element")
    vx = el["vertex"]
    try:
        v = np.stack([vx["x"], vx["y"], vx["z"]], axis=1).astype(float)
    except KeyError:
        raise ParseError("PLY vertex element lacks x/y/z") from None
    n = None
    if all(k in vx for k in ("nx", "ny", "nz")):
        n = np.stack([vx["nx"], vx["ny"], vx["nz"]], axis=1).astype(float)
    faces = []
    face = el.get("face", {})
    idx = face.get("vertex_indices", face.get("vertex_index"))
    if idx is None:
        raise ParseError("PLY without faces")
    rows = idx if isinstance(idx, list) else list(idx)
    for r in rows:
        r = [int(x) for x in r]
        for k in range(1, len(r) - 1):
            faces.append([r[0], r[k], r[k + 1]])
    f = np.array(faces, np.int64).reshape(-1, 3)
    if len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise ParseError("face index out of range")
    return v, f, n


def ply_bytes(vertex_props: dict, faces=None, comments=(), ascii_format: bool = False) -> bytes:
    """Serialize named per-vertex channels (and optional triangles) to PLY.

    ``vertex_props`` maps property names to 1D arrays; float arrays are stored
    as doubles, integer arrays as int32 and booleans as uchar.
    """
    names = list(vertex_props)
    cols = [np.asarray(vertex_props[k]) for k in names]
    count = len(cols[0]) if cols else 0
    types = []
    for c in cols:
        if c.dtype == bool or c.dtype == np.uint8:
            types.append(("uchar", "u1"))
        elif np.issubdtype(c.dtype, np.integer):
            types.append(("int", "i4"))
        else:
            types.append(("double", "f8"))
    fmt = "ascii" if ascii_format else "binary_little_endian"
    lines = ["ply", f"format {fmt} 1.0"]
    lines += [f"comment {c}" for c in comments]
    lines.append(f"element vertex {count}")
    lines += [f"property {t[0]} {n}" for n, t in zip(names, types)]
    if faces is not None:
        lines.append(f"element face {len(faces)}")
        lines.append("property list uchar int vertex_indices")
    lines.append("end_header")
    head = ("\n".join(lines) + "\n").encode("ascii")
    if ascii_format:
        out = []
        for i in range(count):
            out.append(" ".join(repr(float(c[i])) if t[1] == "f8" else str(int(c[i]))
                                for c, t in zip(cols, types)))
        if faces is not None:
            out += ["3 " + " ".join(str(int(x)) for x in f) for f in faces]
        return head + ("\n".join(out) + "\n").encode("ascii")
    dt = np.dtype([(n, "<" + t[1]) for n, t in zip(names, types)])
    arr = np.empty(count, dt)
    for n, c in zip(names, cols):
        arr[n] = c
    body = arr.tobytes()
    if faces is not None:
        fdt = np.dtype([("n", "u1"), ("v", "<i4", (3,))])
        farr = np.empty(len(faces), fdt)
        farr["n"] = 3
        farr["v"] = faces
        body += farr.tobytes()
    return head + body


def write_mesh_ply(path, mesh: TriMesh, channels: dict | None = None, comments=()) -> None:
    """Write a mesh as binary PLY with normals and optional scalar channels."""
    props = {
        "x": mesh.vertices[:, 0], "y": mesh.vertices[:, 1], "z": mesh.vertices[:, 2],
        "nx": mesh.vertex_normals[:, 0], "ny": mesh.vertex_normals[:, 1], "nz": mesh.vertex_normals[:, 2],
    }
    if mesh.curvature is not None:
        props.update(kappa1=mesh.curvature.kappa1, kappa2=mesh.curvature.kappa2,
                     gauss_k=mesh.curvature.gaussian_k, mean_h=mesh.curvature.mean_h)
    props.update(channels or {})
    atomic_write_bytes(path, ply_bytes(props, mesh.faces, comments))


def write_mesh_obj(path, mesh: TriMesh) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def write_mesh_stl(path, mesh: TriMesh) -> None:
    rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    arr = np.zeros(mesh.n_faces, rec)
    arr["n"] = mesh.face_normals()
    arr["v"] = mesh.vertices[mesh.faces]
    atomic_write_bytes(path, b"\0" * 80 + struct.pack("<I", mesh.n_faces) + arr.tobytes())

