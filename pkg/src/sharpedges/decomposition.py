"""Edge annotation transfer and the deterministic decomposition path.

The learned detector, offset regressor and embedding of the original method
are replaced here by baselines (marked "baseline-for-learned"): a curvature
threshold, a local-line projection and density clustering on positions.
Module boundaries stay the same, so a learned front end can replace them.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .curves import PrimitiveType, closest_point
from .errors import InvalidParam, MissingChannel, MissingCurvature, ShapeMismatch
from .fitting import FitConfig, classify_and_fit
from .mesh import bbox_diagonal

DEFAULT_TAU_FRACTION = 0.005
DEFAULT_PERCENTILE = 80.0
DEFAULT_MIN_CURVATURE = 2.0
DEFAULT_OFFSET_K = 16
DEFAULT_MIN_PTS = 5
CORNER_ANGLE_DEG = 45.0


class TooFewNeighborsWarning(UserWarning):
    """Some masked points had too few masked neighbors for an offset estimate."""


@dataclass(frozen=True, eq=False)
class PointAnnotations:
    """Per-point edge labels, offsets to the nearest edge, segment ids and types.

    ``primitive_type`` holds ``PrimitiveType`` integers, -1 where undefined.
    """

    edge_label: np.ndarray
    offset: np.ndarray
    segment_id: np.ndarray
    primitive_type: np.ndarray
    tau: float

    def __post_init__(self):
        n = len(self.edge_label)
        for name in ("offset", "segment_id", "primitive_type"):
            if len(getattr(self, name)) != n:
                raise ShapeMismatch(f"{name} length differs from edge_label")
        if np.any((self.segment_id >= 0) & ~self.edge_label):
            raise InvalidParam("segment ids assigned to non-edge points")

    def __len__(self) -> int:
        return len(self.edge_label)

    def channels(self) -> dict:
        return {"label": self.edge_label.astype(np.uint8),
                "offset_x": self.offset[:, 0], "offset_y": self.offset[:, 1],
                "offset_z": self.offset[:, 2],
                "segment_id": self.segment_id.astype(np.int32),
                "prim_type": self.primitive_type.astype(np.int32)}

    @classmethod
    def from_channels(cls, ch: dict, tau: float) -> "PointAnnotations":
        try:
            off = np.c_[ch["offset_x"], ch["offset_y"], ch["offset_z"]].astype(float)
            return cls(np.asarray(ch["label"]).astype(bool), off,
                       np.asarray(ch["segment_id"]).astype(np.int64),
                       np.asarray(ch["prim_type"]).astype(np.int64), float(tau))
        except KeyError as e:
            raise MissingChannel(f"annotation channel {e.args[0]!r} missing") from None

    def segments(self) -> "SegmentSet":
        return SegmentSet.from_labels(self.segment_id, types=self.primitive_type)


@dataclass(frozen=True, eq=False)
class SegmentSet:
    """Disjoint point-index segments with optional primitive types."""

    segments: list
    types: list
    n_points: int
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        segs = [np.asarray(s, np.int64) for s in self.segments]
        object.__setattr__(self, "segments", segs)
        if len(self.types) != len(segs):
            raise ShapeMismatch("one type entry per segment required")
        if segs:
            allidx = np.concatenate(segs)
            if len(np.unique(allidx)) != len(allidx):
                raise InvalidParam("segments overlap")
            if len(allidx) and (allidx.min() < 0 or allidx.max() >= self.n_points):
                raise InvalidParam("segment index out of range")

    def __len__(self) -> int:
        return len(self.segments)

    def labels(self) -> np.ndarray:
        lab = np.full(self.n_points, -1, np.int64)
        for k, s in enumerate(self.segments):
            lab[s] = k
        return lab

    def membership(self) -> np.ndarray:
        """Boolean ``(n_points, n_segments)`` membership matrix."""
        w = np.zeros((self.n_points, len(self)), bool)
        for k, s in enumerate(self.segments):
            w[s, k] = True
        return w

    @classmethod
    def from_labels(cls, labels, types=None) -> "SegmentSet":
        """Group points by non-negative label; per-point ``types`` are voted."""
        labels = np.asarray(labels, np.int64)
        ids = np.unique(labels[labels >= 0])
        segs = [np.flatnonzero(labels == k) for k in ids]
        if types is None:
            kinds = [None] * len(segs)
        else:
            types = np.asarray(types)
            kinds = [majority_type(types[s]) for s in segs]
        return cls(segs, kinds, len(labels), {"ids": ids.tolist()})


# ------------------------------------------------------------------ annotation

def nearest_edges(x, edges):
    """Index of, distance to and nearest point on the closest edge for each point."""
    x = np.asarray(x, float).reshape(-1, 3)
    best_d = np.full(len(x), np.inf)
    best_i = np.full(len(x), -1, np.int64)
    best_p = np.zeros_like(x)
    for k, c in enumerate(edges):
        p, _ = closest_point(x, c)
        d = np.linalg.norm(x - p, axis=1)
        better = d < best_d
        best_d[better] = d[better]
        best_i[better] = k
        best_p[better] = p[better]
    return best_i, best_d, best_p


def annotate_ground_truth(cloud, edges, tau_fraction: float = DEFAULT_TAU_FRACTION) -> PointAnnotations:
    """Label points within ``tau = tau_fraction * bbox diagonal`` of an edge.

    Offsets point from each sample to its nearest edge point; segment ids and
    primitive types come from that edge and are set only on labeled points.
    An empty edge set yields all-false labels.
    """
    x = cloud.positions if hasattr(cloud, "positions") else np.asarray(cloud, float)
    tau = float(tau_fraction) * bbox_diagonal(x)
    n = len(x)
    if not edges:
        return PointAnnotations(np.zeros(n, bool), np.zeros((n, 3)), np.full(n, -1, np.int64),
                                np.full(n, -1, np.int64), tau)
    idx, dist, near = nearest_edges(x, edges)
    label = dist <= tau
    seg = np.where(label, idx, -1)
    kinds = np.array([int(c.kind) for c in edges])
    ptype = np.where(label, kinds[idx], -1)
    return PointAnnotations(label, near - x, seg, ptype, tau)


# ------------------------------------------------------------------- detection

def detect_sharp_points(cloud, percentile: float = DEFAULT_PERCENTILE,
                        absolute_threshold: float | None = None,
                        min_curvature: float = DEFAULT_MIN_CURVATURE) -> np.ndarray:
    """Curvature-threshold detector (baseline-for-learned).

    Marks points with ``|mean_h| >= threshold``. The threshold is
    ``absolute_threshold`` when given, otherwise the ``percentile`` of
    ``|mean_h|`` raised to at least ``min_curvature`` so that flat clouds
    yield nothing.
    """
    if not cloud.has_curvature:
        raise MissingCurvature("detection needs curvature channels")
    h = np.abs(cloud.mean_h)
    if absolute_threshold is not None:
        thr = float(absolute_threshold)
    else:
        if not 0 <= percentile <= 100:
            raise InvalidParam("percentile must lie in [0, 100]")
        thr = max(float(np.percentile(h, percentile)) if len(h) else 0.0, float(min_curvature))
    return h >= thr


def consolidate(positions, mask, offsets) -> np.ndarray:
    """``x + v`` for masked points; returns only the masked rows."""
    x = np.asarray(positions, float)
    v = np.asarray(offsets, float)
    mask = np.asarray(mask, bool)
    if v.shape != x.shape or len(mask) != len(x):
        raise ShapeMismatch("positions, offsets and mask must align")
    if not np.all(np.isfinite(v[mask])):
        raise InvalidParam("offsets must be finite")
    return x[mask] + v[mask]


def _batched_directions(x, nbr):
    """Principal direction and eigenvalues of each neighborhood ``x[nbr[i]]``."""
    g = x[nbr]
    g = g - g.mean(1, keepdims=True)
    cov = np.einsum("kni,knj->kij", g, g) / nbr.shape[1]
    ev, evec = np.linalg.eigh(cov)
    return evec[:, :, 2], ev


def estimate_offsets(positions, mask, tau: float, k: int = DEFAULT_OFFSET_K):
    """Local-line projection offsets (baseline-for-learned).

    For each masked point a line is fitted to its ``k`` nearest masked points
    (unweighted principal direction, identical to an unweighted line fit) and
    the offset moves the point onto it, clamped to ``3 tau``.

    Returns ``(offsets, too_few)``: offsets are zero outside the mask and for
    points with fewer than 3 masked neighbors, which ``too_few`` flags.
    """
    x = np.asarray(positions, float)
    mask = np.asarray(mask, bool)
    out = np.zeros_like(x)
    too_few = np.zeros(len(x), bool)
    idx = np.flatnonzero(mask)
    if len(idx) < 3:
        too_few[idx] = True
        if len(idx):
            warnings.warn(f"{len(idx)} masked points have too few neighbors", TooFewNeighborsWarning,
                          stacklevel=2)
        return out, too_few
    xm = x[idx]
    kk = min(k, len(idx))
    _, nbr = cKDTree(xm).query(xm, kk)
    nbr = nbr.reshape(len(idx), kk)
    d, _ = _batched_directions(xm, nbr)
    center = xm[nbr].mean(1)
    rel = xm - center
    foot = center + (rel * d).sum(1, keepdims=True) * d
    v = foot - xm
    cap = 3.0 * tau
    norm = np.linalg.norm(v, axis=1, keepdims=True)
    v = np.where(norm > cap, v * (cap / np.maximum(norm, 1e-300)), v)
    out[idx] = v
    return out, too_few


# ------------------------------------------------------------------ clustering

def _dbscan(x, eps, min_pts):
    """Density clustering with order-independent border assignment.

    Clusters are connected components of core points (at least ``min_pts``
    points, self included, within ``eps``). Border points join the cluster of
    their nearest core point; the rest is noise (-1). Cluster ids are ordered
    by the smallest coordinate-sorted member so they do not depend on input
    order.
    """
    n = len(x)
    tree = cKDTree(x)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    deg = np.bincount(pairs.ravel(), minlength=n) + 1 if len(pairs) else np.ones(n, np.int64)
    core = deg >= min_pts
    labels = np.full(n, -1, np.int64)
    if not core.any():
        return labels
    cp = pairs[core[pairs[:, 0]] & core[pairs[:, 1]]] if len(pairs) else np.zeros((0, 2), np.int64)
    g = coo_matrix((np.ones(len(cp)), (cp[:, 0], cp[:, 1])), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    labels[core] = comp[core]
    border = np.flatnonzero(~core)
    if len(border):
        core_idx = np.flatnonzero(core)
        d, j = cKDTree(x[core_idx]).query(x[border], distance_upper_bound=eps)
        ok = np.isfinite(d)
        labels[border[ok]] = labels[core_idx[j[ok]]]
    return _canonical_labels(x, labels)


def _canonical_labels(x, labels):
    ids = np.unique(labels[labels >= 0])
    if not len(ids):
        return labels
    # order clusters by their lexicographically smallest point
    keys = []
    for k in ids:
        pts = x[labels == k]
        o = np.lexsort(pts.T[::-1])
        keys.append(tuple(pts[o[0]]))
    order = sorted(range(len(ids)), key=lambda i: keys[i])
    remap = np.full(ids.max() + 1, -1, np.int64)
    remap[ids[order]] = np.arange(len(ids))
    out = labels.copy()
    out[labels >= 0] = remap[labels[labels >= 0]]
    return out


def _radius_directions(x, pairs):
    """Principal direction and eigenvalues of every point's eps-ball (self included)."""
    n = len(x)
    if len(pairs):
        i = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(n)])
        j = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(n)])
    else:
        i = j = np.arange(n)
    a = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
    cnt = np.asarray(a.sum(1)).ravel()
    mu = (a @ x) / cnt[:, None]
    second = (a @ (x[:, :, None] * x[:, None, :]).reshape(n, 9)).reshape(n, 3, 3) / cnt[:, None, None]
    cov = second - mu[:, :, None] * mu[:, None, :]
    ev, evec = np.linalg.eigh(cov)
    return evec[:, :, 2], ev


def _split_corners(x, labels, eps, min_pts, angle_deg, linearity=0.25):
    """Split clusters where the local line direction turns sharply.

    Each point gets the principal direction of its eps-ball. Points whose
    ball is not line-like, or whose direction differs by more than
    ``angle_deg`` from an eps-neighbor, are removed; the rest is regrouped by
    eps-connectivity and removed points rejoin the nearest surviving group.
    """
    out = np.full(len(x), -1, np.int64)
    nxt = 0
    cos_t = np.cos(np.radians(angle_deg))
    for k in np.unique(labels[labels >= 0]):
        idx = np.flatnonzero(labels == k)
        xs = x[idx]
        pairs = cKDTree(xs).query_pairs(eps, output_type="ndarray")
        if len(idx) < 2 * min_pts:
            out[idx] = nxt
            nxt += 1
            continue
        d, ev = _radius_directions(xs, pairs)
        bad = ev[:, 1] > linearity * np.maximum(ev[:, 2], 1e-300)
        if len(pairs):
            turn = np.abs((d[pairs[:, 0]] * d[pairs[:, 1]]).sum(1)) < cos_t
            bad[pairs[turn].ravel()] = True
        if not bad.any() or (~bad).sum() < min_pts:
            out[idx] = nxt
            nxt += 1
            continue
        gp = pairs[~bad[pairs[:, 0]] & ~bad[pairs[:, 1]]] if len(pairs) else np.zeros((0, 2), np.int64)
        g = coo_matrix((np.ones(len(gp)), (gp[:, 0], gp[:, 1])), shape=(len(idx), len(idx)))
        _, comp = connected_components(g, directed=False)
        sizes = np.bincount(comp[~bad], minlength=comp.max() + 1)
        keep = ~bad & (sizes[comp] >= min_pts)
        if not keep.any():
            out[idx] = nxt
            nxt += 1
            continue
        kept = np.flatnonzero(keep)
        _, j = cKDTree(xs[kept]).query(xs)
        local = comp[kept][j]
        for c in np.unique(local):
            out[idx[local == c]] = nxt
            nxt += 1
    return out


def cluster_segments(points, eps: float, min_pts: int = DEFAULT_MIN_PTS,
                     corner_angle_deg: float = CORNER_ANGLE_DEG) -> SegmentSet:
    """Density clustering of consolidated edge points with corner splitting.

    (baseline-for-learned: replaces embedding-space clustering.) Noise points
    stay unassigned. The partition does not depend on input point order.
    """
    x = np.asarray(points, float).reshape(-1, 3)
    if not eps > 0 or min_pts < 1:
        raise InvalidParam("eps must be positive and min_pts >= 1")
    if len(x) == 0:
        return SegmentSet([], [], 0)
    labels = _dbscan(x, eps, min_pts)
    if corner_angle_deg is not None:
        labels = _canonical_labels(x, _split_corners(x, labels, eps, min_pts, corner_angle_deg))
    seg = SegmentSet.from_labels(labels)
    return SegmentSet(seg.segments, seg.types, len(x), {"noise": int((labels < 0).sum())})


# ---------------------------------------------------------------------- types

def majority_type(types):
    """Most common valid type; ties go to the simpler primitive."""
    vals = [int(t) for t in np.asarray(types).ravel() if int(t) >= 0]
    if not vals:
        return None
    cnt = Counter(vals)
    top = max(cnt.values())
    return PrimitiveType(min(t for t, c in cnt.items() if c == top))


def assign_segment_types(segments: SegmentSet, points=None, point_types=None,
                         fit_config: FitConfig = FitConfig()) -> SegmentSet:
    """Type each segment by majority vote of ``point_types`` or by fitting ``points``.

    When fitting, the chosen fits are kept in ``extras["fits"]``.
    """
    if point_types is not None:
        pt = np.asarray(point_types)
        kinds = [majority_type(pt[s]) for s in segments.segments]
        return SegmentSet(segments.segments, kinds, segments.n_points, dict(segments.extras))
    if points is None:
        raise InvalidParam("either points or point_types is required")
    x = np.asarray(points, float)
    fits = [classify_and_fit(x[s], fit_config) for s in segments.segments]
    extras = dict(segments.extras)
    extras["fits"] = fits
    return SegmentSet(segments.segments, [f.kind for f in fits], segments.n_points, extras)
