"""Triangle meshes, normalization and differential quantities."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateMesh, InsufficientNeighborhood

logger = logging.getLogger(__name__)

# faces with area below this fraction of diag**2 are treated as degenerate
_DEGENERATE_AREA = 1e-14


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CurvatureInfo:
    """Per-vertex principal curvatures with derived Gaussian and mean curvature.

    ``kappa1 >= kappa2`` elementwise. Sign convention: outward normals give a
    sphere positive curvature.
    """

    kappa1: np.ndarray
    kappa2: np.ndarray
    gaussian_k: np.ndarray = field(init=False)
    mean_h: np.ndarray = field(init=False)

    def __post_init__(self):
        k1 = _frozen(self.kappa1, float)
        k2 = _frozen(self.kappa2, float)
        object.__setattr__(self, "kappa1", k1)
        object.__setattr__(self, "kappa2", k2)
        object.__setattr__(self, "gaussian_k", _frozen(k1 * k2, float))
        object.__setattr__(self, "mean_h", _frozen((k1 + k2) / 2, float))

    def scaled(self, factor: float) -> "CurvatureInfo":
        """Curvatures after scaling lengths by ``1 / factor``."""
        return CurvatureInfo(self.kappa1 * factor, self.kappa2 * factor)


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh.

    Build instances with :func:`make_mesh`, which validates faces and computes
    normals; the dataclass constructor trusts its inputs.
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: np.ndarray
    curvature: CurvatureInfo | None = None
    boundary: np.ndarray | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(_face_cross(self.vertices, self.faces), axis=1)

    def face_normals(self) -> np.ndarray:
        c = _face_cross(self.vertices, self.faces)
        n = np.linalg.norm(c, axis=1, keepdims=True)
        return c / np.where(n > 0, n, 1.0)

    def with_vertices(self, vertices) -> "TriMesh":
        """Same connectivity, new positions; normals recomputed, curvature dropped."""
        v = np.asarray(vertices, float)
        return TriMesh(
            _frozen(v, float),
            self.faces,
            _frozen(vertex_normals(v, self.faces), float),
            None,
            self.boundary,
        )


def _face_cross(vertices, faces):
    a = vertices[faces[:, 0]]
    return np.cross(vertices[faces[:, 1]] - a, vertices[faces[:, 2]] - a)


def vertex_normals(vertices, faces) -> np.ndarray:
    """Area-weighted average of incident face normals, normalized."""
    c = _face_cross(vertices, faces)
    acc = np.zeros((len(vertices), 3))
    for k in range(3):
        np.add.at(acc, faces[:, k], c)
    n = np.linalg.norm(acc, axis=1, keepdims=True)
    return acc / np.where(n > 0, n, 1.0)


def make_mesh(vertices, faces, normals=None) -> TriMesh:
    """Validate raw arrays and build a :class:`TriMesh`.

    Zero-area faces are dropped with a logged count. Raises
    :class:`DegenerateMesh` when no face survives.
    """
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(f) == 0:
        raise DegenerateMesh("mesh has no faces")
    if f.min() < 0 or f.max() >= len(v):
        raise DegenerateMesh("face index out of range")
    diag = float(np.linalg.norm(v.max(0) - v.min(0)))
    area2 = np.linalg.norm(_face_cross(v, f), axis=1)
    repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
    ok = (area2 > 2 * _DEGENERATE_AREA * diag * diag) & ~repeated
    if not ok.any():
        raise DegenerateMesh("all faces are degenerate")
    if not ok.all():
        logger.warning("dropped %d degenerate faces", int((~ok).sum()))
        f = f[ok]
    if normals is None:
        n = vertex_normals(v, f)
    else:
        n = np.asarray(normals, float).reshape(-1, 3)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        n = np.where(norm > 0, n / np.where(norm > 0, norm, 1.0), vertex_normals(v, f))
    return TriMesh(_frozen(v, float), _frozen(f, np.int64), _frozen(n, float),
                   None, _frozen(boundary_vertices(f, len(v)), bool))


def boundary_vertices(faces, n_vertices) -> np.ndarray:
    """Mask of vertices lying on an edge used by exactly one face."""
    e = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    mask = np.zeros(n_vertices, bool)
    mask[uniq[counts == 1].ravel()] = True
    return mask


@dataclass(frozen=True)
class Similarity:
    """Map ``x -> (x - center) / scale``."""

    center: np.ndarray
    scale: float

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, float) - self.center) / self.scale

    def invert(self, y) -> np.ndarray:
        return np.asarray(y, float) * self.scale + self.center

    def to_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, d) -> "Similarity":
        return cls(np.asarray(d["center"], float), float(d["scale"]))


def bbox_diagonal(mesh_or_points) -> float:
    """Length of the axis-aligned bounding box diagonal."""
    pts = mesh_or_points.vertices if isinstance(mesh_or_points, TriMesh) else np.asarray(mesh_or_points, float)
    if len(pts) == 0:
        raise DegenerateMesh("empty point set")
    return float(np.linalg.norm(pts.max(0) - pts.min(0)))


def normalization_transform(points) -> Similarity:
    pts = np.asarray(points, float)
    lo, hi = pts.min(0), pts.max(0)
    scale = 0.5 * float(np.linalg.norm(hi - lo))
    if not scale > 0:
        raise DegenerateMesh("all vertices coincide")
    return Similarity((lo + hi) / 2, scale)


def normalize_unit_sphere(mesh: TriMesh) -> tuple[TriMesh, Similarity]:
    """Center the bounding box at the origin and scale its half-diagonal to 1.

    Every vertex then lies in the closed unit ball. The returned transform maps
    original coordinates to normalized ones; ``transform.invert`` undoes it.
    """
    if mesh.n_vertices == 0:
        raise DegenerateMesh("empty mesh")
    tr = normalization_transform(mesh.vertices)
    curv = mesh.curvature.scaled(tr.scale) if mesh.curvature is not None else None
    out = replace(mesh, vertices=_frozen(tr.apply(mesh.vertices), float), curvature=curv)
    return out, tr


def adjacency(mesh: TriMesh) -> sp.csr_matrix:
    """Symmetric vertex adjacency matrix (boolean, no diagonal)."""
    f = mesh.faces
    i = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
    j = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
    n = mesh.n_vertices
    a = sp.csr_matrix((np.ones(len(i), bool), (i, j)), shape=(n, n))
    a.sum_duplicates()
    return a


def k_ring(mesh: TriMesh, ring: int = 2) -> sp.csr_matrix:
    """Sparse pattern of vertices within ``ring`` edge hops (self excluded)."""
    a = adjacency(mesh).astype(np.int32)
    step = a + sp.identity(mesh.n_vertices, dtype=np.int32, format="csr")
    r = step
    for _ in range(ring - 1):
        r = r @ step
    r = r.tocsr()
    r.setdiag(0)
    r.eliminate_zeros()
    r.sort_indices()
    return r


def _tangent_frames(normals):
    a = np.zeros_like(normals)
    idx = np.argmin(np.abs(normals), axis=1)
    a[np.arange(len(normals)), idx] = 1.0
    e1 = np.cross(normals, a)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(normals, e1)
    return e1, e2


def estimate_curvatures(mesh: TriMesh, ring: int = 2, *, chunk: int = 2048) -> TriMesh:
    """Principal curvatures from a local quadric fit.

    For each vertex the ``ring``-ring neighbors are expressed in the tangent
    frame of the vertex normal and the height field
    ``z = a x^2 + b xy + c y^2 + d x + e y`` is fitted by least squares. The
    principal curvatures are the eigenvalues of the shape operator of that
    height field at the origin.

    Raises
    ------
    InsufficientNeighborhood
        If any vertex has fewer than three neighbors.
    """
    nbr = k_ring(mesh, ring)
    counts = np.diff(nbr.indptr)
    if counts.min() < 3:
        bad = int(np.argmin(counts))
        raise InsufficientNeighborhood(f"vertex {bad} has {counts[bad]} neighbors")

    v = mesh.vertices
    n = mesh.vertex_normals
    e1, e2 = _tangent_frames(n)
    k1 = np.empty(len(v))
    k2 = np.empty(len(v))
    order = np.argsort(counts, kind="stable")
    for start in range(0, len(order), chunk):
        ids = order[start:start + chunk]
        m = int(counts[ids].max())
        cols = np.zeros((len(ids), m), np.int64)
        mask = np.zeros((len(ids), m), bool)
        for r, i in enumerate(ids):
            nb = nbr.indices[nbr.indptr[i]:nbr.indptr[i + 1]]
            cols[r, :len(nb)] = nb
            mask[r, :len(nb)] = True
        d = v[cols] - v[ids][:, None, :]
        x = np.einsum("ijk,ik->ij", d, e1[ids])
        y = np.einsum("ijk,ik->ij", d, e2[ids])
        z = np.einsum("ijk,ik->ij", d, n[ids])
        w = mask.astype(float)
        s = np.sqrt((w * (x * x + y * y)).sum(1) / w.sum(1))
        s = np.where(s > 0, s, 1.0)[:, None]
        x, y, z = x / s, y / s, z / s
        phi = np.stack([x * x, x * y, y * y, x, y], axis=-1) * w[..., None]
        lhs = np.einsum("ijk,ijl->ikl", phi, phi)
        rhs = np.einsum("ijk,ij->ik", phi, z)
        # neighborhoods with fewer than 5 points: drop the linear terms
        few = counts[ids] < 5
        lhs[few, 3:, :] = 0.0
        lhs[few, :, 3:] = 0.0
        lhs[few, 3, 3] = lhs[few, 4, 4] = 1.0
        rhs[few, 3:] = 0.0
        ridge = 1e-12 * np.trace(lhs, axis1=1, axis2=2)[:, None, None] * np.eye(5)
        coef = np.linalg.solve(lhs + ridge, rhs[..., None])[..., 0]
        a, b, c = (coef[:, 0:3] / s).T
        fx, fy = coef[:, 3], coef[:, 4]
        ee, ff, gg = 1 + fx * fx, fx * fy, 1 + fy * fy
        wn = np.sqrt(1 + fx * fx + fy * fy)
        ll, mm, nn = 2 * a / wn, b / wn, 2 * c / wn
        det1 = ee * gg - ff * ff
        gauss = (ll * nn - mm * mm) / det1
        mean = (ee * nn - 2 * ff * mm + gg * ll) / (2 * det1)
        disc = np.sqrt(np.maximum(mean * mean - gauss, 0.0))
        # height field bends away from the outward normal on convex surfaces
        k1[ids] = -mean + disc
        k2[ids] = -mean - disc
    return replace(mesh, curvature=CurvatureInfo(k1, k2))
