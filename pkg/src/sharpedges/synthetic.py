"""Meshes with exactly known sharp edges, plus scan-like edge smoothing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import (BSplineCurve, CircularArc, LineSegment, dist_curve, eval_bspline,
                     transform_curve)
from .errors import InvalidParam
from .mesh import TriMesh, adjacency, make_mesh, normalize_unit_sphere
from .meshio import weld

KINDS = ("box", "cylinder", "prism", "fillet_box", "lofted_spline_profile")
DEFAULT_RESOLUTION = 32


@dataclass(frozen=True, eq=False)
class SynthModel:
    mesh: TriMesh
    edges: list
    recipe: dict
    # vertices that lay on a ground-truth edge when the model was generated
    edge_vertices: np.ndarray = field(default=None)


def graded(n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """``n + 1`` nodes on [lo, hi], clustered quadratically toward both ends."""
    t = 0.5 * (1 - np.cos(np.pi * np.arange(n + 1) / n))
    t[0], t[-1] = 0.0, 1.0
    return lo + (hi - lo) * t


def graded_end(n: int) -> np.ndarray:
    """``n + 1`` nodes on [0, 1] clustered toward 1 only."""
    t = np.sin(0.5 * np.pi * np.arange(n + 1) / n)
    t[-1] = 1.0
    return t


class _Builder:
    def __init__(self):
        self.vertices = []
        self.faces = []
        self.count = 0

    def patch(self, grid, outward):
        """Add a structured ``(nu, nv, 3)`` grid; ``outward(centroids)`` hints orientation."""
        nu, nv = grid.shape[:2]
        ids = self.count + np.arange(nu * nv).reshape(nu, nv)
        a, b = ids[:-1, :-1].ravel(), ids[1:, :-1].ravel()
        c, d = ids[1:, 1:].ravel(), ids[:-1, 1:].ravel()
        f = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
        pts = grid.reshape(-1, 3)
        self.vertices.append(pts)
        self.count += len(pts)
        loc = f - (self.count - len(pts))
        tri = pts[loc]
        nrm = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        hint = outward(tri.mean(1))
        flip = (nrm * hint).sum(1) < 0
        f[flip] = f[flip][:, ::-1]
        self.faces.append(f)

    def build(self) -> TriMesh:
        v = np.concatenate(self.vertices)
        f = np.concatenate(self.faces)
        v, f = weld(v, f, rel_tol=1e-9)
        # collapsed rings (cap centers, profile tips) leave zero-area slivers
        a = np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
        scale = float(np.linalg.norm(v.max(0) - v.min(0)))
        return make_mesh(v, f[a > 1e-12 * scale * scale])


def _const(vec):
    vec = np.asarray(vec, float)
    return lambda x: np.broadcast_to(vec, x.shape)


# --------------------------------------------------------------------- kinds

def _box(p, res, rng):
    sx, sy, sz = p["size"]
    b = _Builder()
    gx, gy, gz = graded(res, 0, sx), graded(res, 0, sy), graded(res, 0, sz)
    for axis, lim in ((0, sx), (1, sy), (2, sz)):
        others = [k for k in range(3) if k != axis]
        g1 = (gx, gy, gz)[others[0]]
        g2 = (gx, gy, gz)[others[1]]
        for val, sign in ((0.0, -1.0), (lim, 1.0)):
            grid = np.zeros((len(g1), len(g2), 3))
            grid[..., axis] = val
            grid[..., others[0]] = g1[:, None]
            grid[..., others[1]] = g2[None, :]
            n = np.zeros(3)
            n[axis] = sign
            b.patch(grid, _const(n))
    corners = np.array([[i * sx, j * sy, k * sz] for i in (0, 1) for j in (0, 1) for k in (0, 1)])
    edges = []
    for i in range(8):
        for j in range(i + 1, 8):
            d = corners[j] - corners[i]
            if np.count_nonzero(d) == 1:
                edges.append(LineSegment(corners[i], corners[j]))
    return b.build(), edges


def _extrusion(profile, normals_2d, s_nodes, height, res, cap_center=None, cap_fn=None):
    """Side wall and two caps for a closed planar profile extruded along z.

    ``profile(s)`` maps perimeter parameters to 2D points. Caps are star
    patches from ``cap_center`` unless ``cap_fn(s, rho)`` is supplied.
    """
    b = _Builder()
    z = graded(res, 0, height)
    pts2 = profile(s_nodes)
    side = np.zeros((len(s_nodes), len(z), 3))
    side[..., :2] = pts2[:, None, :]
    side[..., 2] = z[None, :]

    def side_out(x):
        s = _nearest_param(x[:, :2], pts2, s_nodes)
        n2 = normals_2d(s)
        return np.column_stack([n2, np.zeros(len(x))])

    b.patch(side, side_out)
    rho = graded_end(res)
    for zval, sign in ((0.0, -1.0), (height, 1.0)):
        if cap_fn is None:
            c = np.asarray(cap_center, float)
            grid2 = c + rho[None, :, None] * (pts2[:, None, :] - c)
        else:
            grid2 = cap_fn(s_nodes, rho)
        grid = np.concatenate([grid2, np.full(grid2.shape[:2] + (1,), zval)], axis=-1)
        b.patch(grid, _const([0, 0, sign]))
    return b.build()


def _nearest_param(x2, pts2, s_nodes):
    d = ((x2[:, None, :] - pts2[None, :, :]) ** 2).sum(-1)
    return s_nodes[np.argmin(d, axis=1)]


def _cylinder(p, res, rng):
    r, h = p["radius"], p["height"]
    n_ang = max(4 * res, 16)
    s = np.arange(n_ang + 1) / n_ang

    def prof(s):
        a = 2 * np.pi * np.asarray(s)
        return r * np.column_stack([np.cos(a), np.sin(a)])

    def nrm(s):
        a = 2 * np.pi * np.asarray(s)
        return np.column_stack([np.cos(a), np.sin(a)])

    mesh = _extrusion(prof, nrm, s, h, res, cap_center=(0, 0))
    edges = [CircularArc.from_frame((0, 0, zc), (0, 0, 1), r, (1, 0, 0), 2 * np.pi) for zc in (0.0, h)]
    return mesh, edges


def _polygon_perimeter(corners, res):
    """Perimeter parameterization through polygon corners with graded sides."""
    k = len(corners)
    per_side = graded(res)
    s_nodes = np.concatenate([i + per_side[:-1] for i in range(k)] + [np.array([float(k)])])

    def prof(s):
        s = np.asarray(s, float)
        i = np.minimum(np.floor(s).astype(int), k - 1)
        f = s - i
        return corners[i] * (1 - f)[:, None] + corners[(i + 1) % k] * f[:, None]

    def nrm(s):
        s = np.asarray(s, float)
        i = np.minimum(np.floor(s).astype(int), k - 1)
        d = corners[(i + 1) % k] - corners[i]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    return s_nodes, prof, nrm


def _prism(p, res, rng):
    k, r, h = int(p["sides"]), p["radius"], p["height"]
    if k < 3:
        raise InvalidParam("prism needs at least 3 sides")
    ang = 2 * np.pi * np.arange(k) / k
    corners = r * np.column_stack([np.cos(ang), np.sin(ang)])
    s_nodes, prof, nrm = _polygon_perimeter(corners, res)
    mesh = _extrusion(prof, nrm, s_nodes, h, res, cap_center=(0, 0))
    edges = []
    for i in range(k):
        a, b = corners[i], corners[(i + 1) % k]
        for z in (0.0, h):
            edges.append(LineSegment([a[0], a[1], z], [b[0], b[1], z]))
        edges.append(LineSegment([a[0], a[1], 0.0], [a[0], a[1], h]))
    return mesh, edges


def _fillet_box(p, res, rng):
    """Rounded rectangle extruded along z; the fillet walls are smooth."""
    a, b, rf, h = p["half_x"], p["half_y"], p["fillet"], p["height"]
    if not 0 < rf < min(a, b):
        raise InvalidParam("fillet radius must be in (0, min(half_x, half_y))")
    # pieces in CCW order: (kind, data)
    cx, cy = a - rf, b - rf
    pieces = []
    centers = [np.array([cx, cy]), np.array([-cx, cy]), np.array([-cx, -cy]), np.array([cx, -cy])]
    start_ang = [0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi]
    for i in range(4):
        c, a0 = centers[i], start_ang[i]
        p0 = c + rf * np.array([math.cos(a0), math.sin(a0)])
        prev_c, prev_a = centers[i - 1], start_ang[i - 1] + 0.5 * np.pi
        q0 = prev_c + rf * np.array([math.cos(prev_a), math.sin(prev_a)])
        pieces.append(("line", q0, p0))
        pieces.append(("arc", c, a0))
    n_line = graded(res)
    n_arc = np.linspace(0, 1, res // 2 + 2)
    s_nodes = np.concatenate([i + (n_line if kind == "line" else n_arc)[:-1]
                              for i, (kind, *_) in enumerate(pieces)] + [np.array([8.0])])

    def piece_eval(s):
        s = np.asarray(s, float)
        i = np.minimum(np.floor(s).astype(int), 7)
        f = s - i
        out = np.zeros((len(s), 2))
        nrm = np.zeros((len(s), 2))
        for k, (kind, u, w) in enumerate(pieces):
            m = i == k
            if not m.any():
                continue
            if kind == "line":
                out[m] = u * (1 - f[m])[:, None] + w * f[m][:, None]
                d = w - u
                nrm[m] = np.array([d[1], -d[0]]) / np.linalg.norm(d)
            else:
                ang = w + 0.5 * np.pi * f[m]
                dirs = np.column_stack([np.cos(ang), np.sin(ang)])
                out[m] = u + rf * dirs
                nrm[m] = dirs
        return out, nrm

    mesh = _extrusion(lambda s: piece_eval(s)[0], lambda s: piece_eval(s)[1], s_nodes, h, res,
                      cap_center=(0, 0))
    edges = []
    for z in (0.0, h):
        for kind, u, w in pieces:
            if kind == "line":
                edges.append(LineSegment([u[0], u[1], z], [w[0], w[1], z]))
            else:
                d = np.array([math.cos(w), math.sin(w), 0.0])
                edges.append(CircularArc.from_frame([u[0], u[1], z], (0, 0, -1), rf, d, 0.5 * np.pi))
    return mesh, edges


def _lofted(p, res, rng):
    """Region between a cubic b-spline and its chord, extruded along z."""
    cps2 = np.asarray(p["control_points"], float)
    h = p["height"]
    if len(cps2) < 4:
        raise InvalidParam("profile needs at least 4 control points")
    if abs(cps2[0, 1]) > 0 or abs(cps2[-1, 1]) > 0 or np.any(np.diff(cps2[:, 0]) <= 0):
        raise InvalidParam("profile control points must have increasing x and end on y=0")
    cps3 = np.column_stack([cps2, np.zeros(len(cps2))])
    base = BSplineCurve.clamped_uniform(cps3, 3)
    t = graded(2 * res)
    curve2 = eval_bspline(base, t)[:, :2]
    b = _Builder()
    z = graded(res, 0, h)
    wall = np.zeros((len(t), len(z), 3))
    wall[..., :2] = curve2[:, None, :]
    wall[..., 2] = z[None, :]
    d = np.gradient(curve2, axis=0)
    out2 = np.column_stack([-d[:, 1], d[:, 0]])
    out2 /= np.linalg.norm(out2, axis=1, keepdims=True)

    def wall_out(x):
        s = _nearest_param(x[:, :2], curve2, np.arange(len(t)))
        return np.column_stack([out2[s], np.zeros(len(x))])

    b.patch(wall, wall_out)
    chord = np.zeros((len(t), len(z), 3))
    chord[..., 0] = curve2[:, None, 0]
    chord[..., 2] = z[None, :]
    b.patch(chord, _const([0, -1, 0]))
    rho = graded(res)
    for zval, sign in ((0.0, -1.0), (h, 1.0)):
        cap = np.zeros((len(t), len(rho), 3))
        cap[..., 0] = curve2[:, None, 0]
        cap[..., 1] = curve2[:, None, 1] * rho[None, :]
        cap[..., 2] = zval
        b.patch(cap, _const([0, 0, sign]))
    mesh = b.build()
    edges = []
    for zval in (0.0, h):
        edges.append(BSplineCurve(3, np.column_stack([cps2, np.full(len(cps2), zval)]), base.knots))
        edges.append(LineSegment([cps2[-1, 0], 0, zval], [cps2[0, 0], 0, zval]))
    for x in (cps2[0, 0], cps2[-1, 0]):
        edges.append(LineSegment([x, 0, 0], [x, 0, h]))
    return mesh, edges


_GENERATORS = {"box": _box, "cylinder": _cylinder, "prism": _prism,
               "fillet_box": _fillet_box, "lofted_spline_profile": _lofted}


def default_params(kind: str, seed: int = 0) -> dict:
    """Canonical parameters; only the lofted profile depends on ``seed``."""
    if kind == "box":
        return {"size": [1.0, 1.0, 1.0]}
    if kind == "cylinder":
        return {"radius": 0.5, "height": 1.0}
    if kind == "prism":
        return {"sides": 6, "radius": 0.5, "height": 1.0}
    if kind == "fillet_box":
        return {"half_x": 0.6, "half_y": 0.4, "fillet": 0.15, "height": 0.5}
    if kind == "lofted_spline_profile":
        rng = np.random.default_rng(seed)
        x = np.linspace(-0.5, 0.5, 8)
        y = np.concatenate([[0.0], rng.uniform(0.25, 0.6, 6), [0.0]])
        return {"control_points": np.column_stack([x, y]).tolist(), "height": 0.4}
    raise InvalidParam(f"unknown kind {kind!r}; expected one of {KINDS}")


def random_params(kind: str, seed: int) -> dict:
    """Randomized parameters for benchmark variety, including a random rotation."""
    rng = np.random.default_rng([seed, KINDS.index(kind) if kind in KINDS else 99])
    p = default_params(kind, seed)
    if kind == "box":
        p["size"] = rng.uniform(0.6, 1.4, 3).round(6).tolist()
    elif kind == "cylinder":
        p.update(radius=round(float(rng.uniform(0.3, 0.7)), 6), height=round(float(rng.uniform(0.5, 1.5)), 6))
    elif kind == "prism":
        p.update(sides=int(rng.integers(3, 9)), radius=round(float(rng.uniform(0.4, 0.8)), 6),
                 height=round(float(rng.uniform(0.4, 1.2)), 6))
    elif kind == "fillet_box":
        hx, hy = rng.uniform(0.4, 0.8, 2)
        p.update(half_x=round(float(hx), 6), half_y=round(float(hy), 6),
                 fillet=round(float(rng.uniform(0.1, 0.3) * min(hx, hy)), 6),
                 height=round(float(rng.uniform(0.3, 0.8)), 6))
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    p["rotation"] = q.round(12).tolist()
    return p


def _mark_edge_vertices(mesh, edges, tol=1e-6):
    mask = np.zeros(mesh.n_vertices, bool)
    for c in edges:
        mask |= dist_curve(mesh.vertices, c) <= tol
    return mask


def gen_primitive_solid(kind: str, params: dict | None = None, resolution: int = DEFAULT_RESOLUTION,
                        seed: int = 0) -> SynthModel:
    """Watertight mesh with its exact sharp-edge set.

    ``params`` override :func:`default_params`. An optional ``"rotation"``
    entry (3x3 orthogonal matrix) rotates mesh and edges together.
    """
    if kind not in _GENERATORS:
        raise InvalidParam(f"unknown kind {kind!r}; expected one of {KINDS}")
    if resolution < 2:
        raise InvalidParam("resolution must be >= 2")
    p = default_params(kind, seed)
    p.update(params or {})
    rng = np.random.default_rng(seed)
    mesh, edges = _GENERATORS[kind](p, int(resolution), rng)
    rot = p.get("rotation")
    if rot is not None:
        rmat = np.asarray(rot, float)
        if not np.allclose(rmat @ rmat.T, np.eye(3), atol=1e-9):
            raise InvalidParam("rotation must be orthogonal")
        mesh = mesh.with_vertices(mesh.vertices @ rmat.T)
        edges = [transform_curve(c, lambda x: np.asarray(x) @ rmat.T, 1.0) for c in edges]
    recipe = {"kind": kind, "params": p, "resolution": int(resolution), "seed": int(seed)}
    return SynthModel(mesh, edges, json.loads(json.dumps(recipe)), _mark_edge_vertices(mesh, edges))


def smooth_edges(model: SynthModel, rounds: int = 5, lam: float = 0.5) -> SynthModel:
    """Uniform Laplacian smoothing of the mesh; the edge set is left untouched."""
    if rounds < 0:
        raise InvalidParam("rounds must be >= 0")
    if rounds == 0:
        return model
    adj = adjacency(model.mesh).astype(float)
    deg = np.asarray(adj.sum(1)).ravel()
    deg = np.where(deg > 0, deg, 1.0)
    v = np.array(model.mesh.vertices)
    for _ in range(rounds):
        v = v + lam * (adj @ v / deg[:, None] - v)
    recipe = dict(model.recipe)
    recipe["smoothing"] = {"rounds": int(rounds), "lambda": float(lam)}
    return SynthModel(model.mesh.with_vertices(v), model.edges, recipe, model.edge_vertices)


def normalize_model(model: SynthModel) -> SynthModel:
    """Map mesh and edges into the unit-sphere frame of the mesh."""
    mesh, tr = normalize_unit_sphere(model.mesh)
    edges = [transform_curve(c, tr.apply, tr.scale) for c in model.edges]
    recipe = dict(model.recipe)
    recipe["normalization"] = tr.to_dict()
    return SynthModel(mesh, edges, recipe, model.edge_vertices)
