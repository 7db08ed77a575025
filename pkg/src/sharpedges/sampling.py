"""Uniform and curvature-adaptive point sampling on triangle meshes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from . import _kernels
from .errors import DegenerateMesh, InvalidParam, MissingCurvature, ParseError
from .mesh import TriMesh
from .meshio import atomic_write_bytes, ply_bytes, read_ply

DEFAULT_N = 10_000
DEFAULT_GAMMA = 1.5
DEFAULT_OVERSAMPLE = 5
# exponent cap: exp(709.78) is the largest finite double
MAX_LOG_WEIGHT = 700.0

# Yuksel's elimination kernel parameters for 2D (surface) domains
_ALPHA = 8.0
_BETA = 0.65
_GAMMA_RMIN = 1.5


@dataclass(frozen=True)
class SampledPoint:
    position: np.ndarray
    normal: np.ndarray
    gaussian_k: float
    mean_h: float
    source_face: int
    weight: float


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Structure-of-arrays point cloud with curvature feature channels.

    ``kappa1``/``kappa2``, ``gaussian_k`` and ``mean_h`` are NaN when the
    source mesh carried no curvature. ``channels`` holds extra per-point
    arrays (annotations, predictions) keyed by name.
    """

    positions: np.ndarray
    normals: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    source_face: np.ndarray
    weight: np.ndarray
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("positions", "normals", "kappa1", "kappa2", "source_face", "weight"):
            a = np.array(getattr(self, name), copy=True)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def gaussian_k(self) -> np.ndarray:
        return self.kappa1 * self.kappa2

    @property
    def mean_h(self) -> np.ndarray:
        return (self.kappa1 + self.kappa2) / 2

    @property
    def has_curvature(self) -> bool:
        return bool(len(self)) and not np.isnan(self.kappa1).any()

    def __getitem__(self, i) -> SampledPoint:
        return SampledPoint(self.positions[i], self.normals[i], float(self.gaussian_k[i]),
                            float(self.mean_h[i]), int(self.source_face[i]), float(self.weight[i]))

    def subset(self, idx) -> "PointCloud":
        idx = np.asarray(idx)
        return PointCloud(self.positions[idx], self.normals[idx], self.kappa1[idx], self.kappa2[idx],
                          self.source_face[idx], self.weight[idx],
                          {k: np.asarray(v)[idx] for k, v in self.channels.items()})

    def with_channels(self, **channels) -> "PointCloud":
        ch = dict(self.channels)
        ch.update(channels)
        return PointCloud(self.positions, self.normals, self.kappa1, self.kappa2,
                          self.source_face, self.weight, ch)


def log_sampling_weight(kappa1, kappa2, gamma: float = DEFAULT_GAMMA, power_inside: bool = True):
    """Natural log of the curvature sampling weight, capped at ``MAX_LOG_WEIGHT``.

    ``power_inside=True`` gives ``(|k1| + |k2|) ** gamma``; ``False`` reads the
    weight as ``exp(|k1| + |k2|) ** gamma``, i.e. ``gamma * (|k1| + |k2|)``.
    """
    if not gamma > 0:
        raise InvalidParam("gamma must be positive")
    s = np.abs(np.asarray(kappa1, float)) + np.abs(np.asarray(kappa2, float))
    with np.errstate(over="ignore"):
        e = s ** gamma if power_inside else gamma * s
    return np.minimum(e, MAX_LOG_WEIGHT)


def sampling_weight(kappa1, kappa2, gamma: float = DEFAULT_GAMMA, power_inside: bool = True):
    """Curvature weight ``exp((|k1| + |k2|) ** gamma)``; saturates instead of overflowing."""
    w = np.exp(log_sampling_weight(kappa1, kappa2, gamma, power_inside))
    return float(w) if np.ndim(w) == 0 else w


def sample_uniform(mesh: TriMesh, n: int, seed: int = 0, gamma: float = DEFAULT_GAMMA) -> PointCloud:
    """Area-weighted uniform surface samples, deterministic in ``seed``.

    Normals and principal curvatures are interpolated barycentrically from
    the vertices; ``weight`` is the curvature weight at each sample (1 when
    the mesh has no curvature).
    """
    if n < 1:
        raise InvalidParam("n must be >= 1")
    areas = mesh.face_areas()
    total = float(areas.sum())
    if not total > 0:
        raise DegenerateMesh("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(areas)
    face = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), len(areas) - 1)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.stack([1 - r1, r1 * (1 - r2), r1 * r2], axis=1)
    tri = mesh.faces[face]
    pos = np.einsum("ij,ijk->ik", bary, mesh.vertices[tri])
    nrm = np.einsum("ij,ijk->ik", bary, mesh.vertex_normals[tri])
    length = np.linalg.norm(nrm, axis=1, keepdims=True)
    fallback = mesh.face_normals()[face]
    nrm = np.where(length > 1e-12, nrm / np.where(length > 0, length, 1), fallback)
    if mesh.curvature is not None:
        k1 = np.einsum("ij,ij->i", bary, mesh.curvature.kappa1[tri])
        k2 = np.einsum("ij,ij->i", bary, mesh.curvature.kappa2[tri])
        w = sampling_weight(k1, k2, gamma)
    else:
        k1 = np.full(n, np.nan)
        k2 = np.full(n, np.nan)
        w = np.ones(n)
    return PointCloud(pos, nrm, k1, k2, face.astype(np.int64), np.atleast_1d(w))


def elimination_radius(area: float, n: int) -> float:
    """Maximum Poisson-disk radius for ``n`` samples on a surface of ``area``."""
    return math.sqrt(area / (2 * math.sqrt(3) * n))


def neighbor_graph(points, r_max: float, n_keep: int, n_candidates: int):
    """CSR neighbor lists within ``2 r_max`` and the elimination kernel value per entry."""
    pts = np.asarray(points, float)
    m = len(pts)
    pairs = cKDTree(pts).query_pairs(2 * r_max, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros(m + 1, np.int64), np.zeros(0, np.int64), np.zeros(0)
    d = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
    r_min = r_max * (1 - (n_keep / n_candidates) ** _GAMMA_RMIN) * _BETA
    d = np.maximum(d, 2 * r_min)
    w = (1 - d / (2 * r_max)) ** _ALPHA
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    mat = sparse.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(m, m))
    mat.sort_indices()
    return mat.indptr.astype(np.int64), mat.indices.astype(np.int64), mat.data


def weighted_elimination(points, log_weights, n: int, area: float) -> np.ndarray:
    """Indices (sorted) of the ``n`` candidates that survive weighted elimination.

    Each candidate's elimination score is its neighborhood density divided by
    its weight, so high-weight candidates are removed last. Whenever a point
    is removed its contribution is subtracted from its neighbors' scores.
    """
    m = len(points)
    if n > m:
        raise InvalidParam("cannot keep more samples than candidates")
    if n == m:
        return np.arange(m)
    r_max = elimination_radius(area, n)
    indptr, indices, contrib = neighbor_graph(points, r_max, n, m)
    removed = _kernels.eliminate(indptr, indices, contrib, np.asarray(log_weights, float), n)
    keep = np.ones(m, bool)
    keep[removed] = False
    return np.flatnonzero(keep)


def sample_adaptive(mesh: TriMesh, n: int = DEFAULT_N, gamma: float = DEFAULT_GAMMA,
                    oversample: int = DEFAULT_OVERSAMPLE, seed: int = 0,
                    power_inside: bool = True) -> PointCloud:
    """Curvature-weighted sample elimination.

    Draws ``oversample * n`` uniform candidates, weights them by principal
    curvature and eliminates down to exactly ``n`` points. The output is a
    subset of the candidates in candidate order.
    """
    if oversample < 2:
        raise InvalidParam("oversample must be >= 2")
    if mesh.curvature is None:
        raise MissingCurvature("adaptive sampling needs mesh curvature")
    if n < 1:
        raise InvalidParam("n must be >= 1")
    cand = sample_uniform(mesh, oversample * n, seed, gamma)
    logw = log_sampling_weight(cand.kappa1, cand.kappa2, gamma, power_inside)
    area = float(mesh.face_areas().sum())
    keep = weighted_elimination(cand.positions, logw, n, area)
    out = cand.subset(keep)
    return PointCloud(out.positions, out.normals, out.kappa1, out.kappa2, out.source_face,
                      np.exp(logw[keep]))


# ---------------------------------------------------------------- file formats

_BASE = ("x", "y", "z", "nx", "ny", "nz", "kappa1", "kappa2", "gauss_k", "mean_h", "face", "weight")


def cloud_to_props(cloud: PointCloud) -> dict:
    p, nrm = cloud.positions, cloud.normals
    props = {"x": p[:, 0], "y": p[:, 1], "z": p[:, 2], "nx": nrm[:, 0], "ny": nrm[:, 1], "nz": nrm[:, 2],
             "kappa1": cloud.kappa1, "kappa2": cloud.kappa2, "gauss_k": cloud.gaussian_k,
             "mean_h": cloud.mean_h, "face": cloud.source_face.astype(np.int32), "weight": cloud.weight}
    for k, v in cloud.channels.items():
        if k in props:
            raise InvalidParam(f"channel name {k!r} collides with a base property")
        props[k] = np.asarray(v)
    return props


def write_cloud_ply(path, cloud: PointCloud, comments=(), ascii_format: bool = False) -> None:
    """Write a cloud as PLY; extra ``channels`` become additional vertex properties."""
    atomic_write_bytes(path, ply_bytes(cloud_to_props(cloud), None, comments, ascii_format))


def read_cloud_ply(path) -> PointCloud:
    el = read_ply(path)["elements"]
    vx = el.get("vertex")
    if vx is None or not all(k in vx for k in ("x", "y", "z")):
        raise ParseError(f"{path}: not a point cloud PLY")
    n = len(vx["x"])
    pos = np.stack([vx["x"], vx["y"], vx["z"]], 1).astype(float)
    if all(k in vx for k in ("nx", "ny", "nz")):
        nrm = np.stack([vx["nx"], vx["ny"], vx["nz"]], 1).astype(float)
    else:
        nrm = np.zeros((n, 3))
    k1 = vx["kappa1"].astype(float) if "kappa1" in vx else np.full(n, np.nan)
    k2 = vx["kappa2"].astype(float) if "kappa2" in vx else np.full(n, np.nan)
    face = vx["face"].astype(np.int64) if "face" in vx else np.full(n, -1, np.int64)
    w = vx["weight"].astype(float) if "weight" in vx else np.ones(n)
    ch = {k: v for k, v in vx.items() if k not in _BASE}
    return PointCloud(pos, nrm, k1, k2, face, w, ch)


def write_cloud_text(path, cloud: PointCloud) -> None:
    """Plain text, one point per line: ``x y z nx ny nz gauss_k mean_h``."""
    arr = np.column_stack([cloud.positions, cloud.normals, cloud.gaussian_k, cloud.mean_h])
    lines = [" ".join(repr(float(v)) for v in row) for row in arr]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def read_cloud_text(path) -> PointCloud:
    try:
        arr = np.loadtxt(path, ndmin=2)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if arr.shape[1] < 3:
        raise ParseError("need at least x y z per line")
    n = len(arr)
    nrm = arr[:, 3:6] if arr.shape[1] >= 6 else np.zeros((n, 3))
    if arr.shape[1] >= 8:
        # recover principal curvatures from K and H
        k, h = arr[:, 6], arr[:, 7]
        disc = np.sqrt(np.maximum(h * h - k, 0))
        k1, k2 = h + disc, h - disc
    else:
        k1 = k2 = np.full(n, np.nan)
    return PointCloud(arr[:, :3], nrm, k1, k2, np.full(n, -1, np.int64), np.ones(n))
