"""End-to-end orchestration: sample, annotate or detect, consolidate, cluster, fit, evaluate."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .curves import LineSegment, PrimitiveType, curve_from_dict, curve_to_dict
from .decomposition import (PointAnnotations, SegmentSet, annotate_ground_truth, cluster_segments,
                            TooFewNeighborsWarning, consolidate, detect_sharp_points,
                            estimate_offsets)
from .errors import DegenerateInput, InvalidParam, MissingChannel, ParseError, ShapeMismatch
from .fitting import FitConfig, FitResult, classify_and_fit, fit_bspline, fit_circle, fit_line
from .losses import (LossWeights, PROB_CLAMP, decomposition_loss, fitting_residual_loss, focal_loss,
                     offset_loss, total_loss, triplet_loss, type_cross_entropy)
from .mesh import TriMesh, bbox_diagonal, estimate_curvatures
from .metrics import EvalReport, evaluate, hungarian_match, iou_matrix
from .sampling import sample_adaptive, sample_uniform
from .synthetic import gen_primitive_solid, normalize_model, random_params, smooth_edges

BENCHMARK_KINDS = ("box", "cylinder", "fillet_box", "lofted_spline_profile")


class EmptyResultWarning(UserWarning):
    """A pipeline stage produced nothing (no detected points or no edges)."""


@dataclass
class PipelineConfig:
    n_points: int = 10_000
    gamma: float = 1.5
    tau_fraction: float = 0.005
    eta: float = 1.5
    theta: float = 0.5
    alpha_e: float = 1.0
    alpha_o: float = 10.0
    alpha_t: float = 2.0
    alpha_emb: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    spline_tolerance: float = 0.01
    fit_accept_threshold: float = 0.01
    max_control_points: int = 64
    sampling: str = "adaptive"
    oversample: int = 5
    curvature_ring: int = 2
    eps_factor: float = 2.0
    min_pts: int = 5
    corner_angle_deg: float = 45.0
    detect_percentile: float = 80.0
    detect_min_curvature: float = 2.0
    detect_threshold: float | None = None
    offset_k: int = 16
    merge_segments: bool = True
    merge_link_factor: float = 10.0
    snap_corners: bool = True
    snap_link_factor: float = 5.0
    recover_factor: float = 1.5
    ecd_samples: int = 512
    empty_penalty: float = 1.0
    smoothing_rounds: int = 5
    smoothing_lambda: float = 0.5
    resolution: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.sampling not in ("uniform", "adaptive"):
            raise InvalidParam("sampling must be 'uniform' or 'adaptive'")
        if self.n_points < 1:
            raise InvalidParam("n_points must be >= 1")
        for k in ("tau_fraction", "eps_factor", "spline_tolerance"):
            if not getattr(self, k) > 0:
                raise InvalidParam(f"{k} must be positive")
        self.loss_weights()

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.alpha_e, self.alpha_o, self.alpha_t, self.alpha_emb,
                           self.alpha, self.beta, self.eta, self.theta)

    def fit_config(self) -> FitConfig:
        return FitConfig(self.fit_accept_threshold, self.spline_tolerance, self.max_control_points)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidParam(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: {e}") from None
        if not isinstance(d, dict):
            raise ParseError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)

    def with_overrides(self, pairs) -> "PipelineConfig":
        """Apply ``key=value`` strings; values are parsed as JSON when possible."""
        d = self.to_dict()
        for item in pairs or ():
            if "=" not in item:
                raise InvalidParam(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            k = k.strip().replace("-", "_")
            if k not in d:
                raise InvalidParam(f"unknown config key {k!r}")
            try:
                d[k] = json.loads(v)
            except json.JSONDecodeError:
                d[k] = v
        return PipelineConfig.from_dict(d)

    def tau(self, points) -> float:
        return self.tau_fraction * bbox_diagonal(points)


# --------------------------------------------------------------------- stages

def ensure_curvature(mesh: TriMesh, config: PipelineConfig) -> TriMesh:
    return mesh if mesh.curvature is not None else estimate_curvatures(mesh, config.curvature_ring)


def sample_cloud(mesh: TriMesh, config: PipelineConfig, seed: int | None = None):
    mesh = ensure_curvature(mesh, config)
    s = config.seed if seed is None else seed
    if config.sampling == "uniform":
        return sample_uniform(mesh, config.n_points, seed=s, gamma=config.gamma)
    return sample_adaptive(mesh, config.n_points, config.gamma, config.oversample, seed=s)


def fit_typed(points, kind, fit_config: FitConfig) -> FitResult:
    """Fit the requested primitive, falling back to type selection if it is degenerate."""
    try:
        if kind == PrimitiveType.LINE:
            return fit_line(points)
        if kind == PrimitiveType.CIRCLE:
            return fit_circle(points, fit_config.arc_gap_deg)
        if kind == PrimitiveType.BSPLINE:
            return fit_bspline(points, fit_config.spline_tolerance, fit_config.degree,
                               fit_config.max_ctrl)
    except (DegenerateInput, InvalidParam):
        pass
    return classify_and_fit(points, fit_config)


def fit_segments(points, segments: SegmentSet, fit_config: FitConfig, use_types: bool = False):
    """Fit one curve per segment; segments that cannot be fitted yield ``None``."""
    out = []
    for idx, kind in zip(segments.segments, segments.types):
        try:
            if use_types and kind is not None:
                out.append(fit_typed(points[idx], kind, fit_config))
            else:
                out.append(classify_and_fit(points[idx], fit_config))
        except (DegenerateInput, InvalidParam):
            out.append(None)
    return out


def _merge_residual(fit: FitResult) -> float:
    oop = fit.extras.get("out_of_plane_rms", 0.0)
    return float(np.hypot(fit.residual, oop))


def _compatible(a: FitResult, b: FitResult, cos_t: float) -> bool:
    if a.kind != b.kind or a.kind == PrimitiveType.BSPLINE:
        return False
    if a.kind == PrimitiveType.LINE:
        return abs(float(a.curve.direction @ b.curve.direction)) >= cos_t
    return abs(float(a.curve.plane_normal @ b.curve.plane_normal)) >= cos_t


def merge_segments(points, segments: SegmentSet, fits, fit_config: FitConfig, link_dist: float,
                   angle_deg: float = 45.0):
    """Greedily join touching line (or circle) segments that one primitive still explains.

    Two segments are candidates when some of their points lie within
    ``link_dist`` and their fits agree in kind and in direction (axis for
    circles) up to ``angle_deg``. The candidate whose union fit has the
    smallest residual is merged first, as long as that residual stays
    below the acceptance threshold. Repeats until no candidate remains.
    """
    x = np.asarray(points, float)
    segs = [np.asarray(s, np.int64) for s in segments.segments]
    fits = list(fits)
    if sum(f is not None for f in fits) < 2:
        return segments, fits
    removed = [False] * len(segs)
    cos_t = np.cos(np.radians(angle_deg))
    owner = np.full(len(x), -1, np.int64)
    for k, sidx in enumerate(segs):
        if fits[k] is not None:
            owner[sidx] = k
    members = np.flatnonzero(owner >= 0)
    pairs = cKDTree(x[members]).query_pairs(link_dist, output_type="ndarray")
    a, b = owner[members[pairs[:, 0]]], owner[members[pairs[:, 1]]]
    touch = {(int(min(i, j)), int(max(i, j))) for i, j in zip(a, b) if i != j}
    cache = {}

    def union_fit(i, j):
        if (i, j) not in cache:
            idx = np.sort(np.concatenate([segs[i], segs[j]]))
            f = fit_typed(x[idx], fits[i].kind, fit_config)
            r = _merge_residual(f) if f.kind == fits[i].kind else np.inf
            cache[(i, j)] = (idx, f, r)
        return cache[(i, j)]

    while True:
        best = None
        for i, j in sorted(touch):
            if not _compatible(fits[i], fits[j], cos_t):
                continue
            idx, f, r = union_fit(i, j)
            if r <= fit_config.accept_threshold and (best is None or r < best[0]):
                best = (r, i, j, idx, f)
        if best is None:
            break
        _, i, j, idx, f = best
        segs[i], fits[i], removed[j] = idx, f, True
        touch = {(min(p, q), max(p, q)) for p, q in
                 ((i if p == j else p, i if q == j else q) for p, q in touch) if p != q}
        cache = {k: v for k, v in cache.items() if i not in k and j not in k}
    keep = sorted((k for k in range(len(segs)) if not removed[k]), key=lambda k: int(segs[k].min()))
    merged = SegmentSet([segs[k] for k in keep],
                        [fits[k].kind if fits[k] is not None else None for k in keep],
                        segments.n_points, dict(segments.extras))
    return merged, [fits[k] for k in keep]


def _endpoint_records(fits):
    """``(fit index, end, point, is_line)`` for every open curve end."""
    recs = []
    for k, f in enumerate(fits):
        if f is None:
            continue
        c = f.curve
        if f.kind == PrimitiveType.LINE:
            recs += [(k, 0, c.x_start, True), (k, 1, c.x_end, True)]
        elif f.kind == PrimitiveType.CIRCLE:
            if not c.is_full_circle:
                recs += [(k, 0, c.x_start, False), (k, 1, c.x_end, False)]
        else:
            recs += [(k, 0, c.control_points[0], False), (k, 1, c.control_points[-1], False)]
    return recs


def _junction(lines, anchors, cos_t):
    """Least-squares meeting point of non-parallel lines, else the mean anchor."""
    dirs = [f.curve.direction for f in lines]
    crossing = any(abs(float(a @ b)) < cos_t for i, a in enumerate(dirs) for b in dirs[i + 1:])
    if len(lines) >= 2 and crossing:
        m = np.zeros((3, 3))
        rhs = np.zeros(3)
        for f, d in zip(lines, dirs):
            proj = np.eye(3) - np.outer(d, d)
            m += proj
            rhs += proj @ f.curve.x_start
        return np.linalg.lstsq(m, rhs, rcond=None)[0]
    if anchors:
        return np.mean(anchors, axis=0)
    return None


def snap_corners(fits, link_dist: float, angle_deg: float = 45.0):
    """Move line endpoints that meet other curve ends onto their common junction.

    Curve ends within ``link_dist`` of each other form a junction. Lines
    that cross at more than ``angle_deg`` meet at their least-squares
    intersection; a single line meeting arcs or splines extends to their
    mean end point. Lines keep their direction and only ever move an
    endpoint by at most ``link_dist``; other curves are not changed.
    """
    fits = list(fits)
    recs = _endpoint_records(fits)
    if len(recs) < 2:
        return fits
    pts = np.array([r[2] for r in recs])
    pairs = cKDTree(pts).query_pairs(link_dist, output_type="ndarray")
    if not len(pairs):
        return fits
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(recs), len(recs)))
    _, comp = connected_components(g, directed=False)
    cos_t = np.cos(np.radians(angle_deg))
    ends = {}
    for c in np.unique(comp):
        members = [recs[i] for i in np.flatnonzero(comp == c)]
        owners = [r[0] for r in members]
        if len(members) < 2 or len(set(owners)) != len(owners):
            continue
        lines = [fits[r[0]] for r in members if r[3]]
        anchors = [r[2] for r in members if not r[3]]
        p = _junction(lines, anchors, cos_t)
        if p is None:
            continue
        for k, e, x, is_line in members:
            if not is_line:
                continue
            seg = fits[k].curve
            q = seg.x_start + ((p - seg.x_start) @ seg.direction) * seg.direction
            if np.linalg.norm(q - x) <= link_dist:
                ends.setdefault(k, {})[e] = q
    for k, moved in ends.items():
        seg = fits[k].curve
        a, b = moved.get(0, seg.x_start), moved.get(1, seg.x_end)
        if (b - a) @ seg.direction <= 0:
            continue
        extras = dict(fits[k].extras)
        extras["snapped"] = sorted(moved)
        fits[k] = FitResult(LineSegment(a, b), fits[k].residual, fits[k].ordering, extras)
    return fits


@dataclass
class Prediction:
    """Output of the decomposition and fitting stages on one cloud."""

    mask: np.ndarray
    offsets: np.ndarray
    segments: SegmentSet
    fits: list
    tau: float
    flags: dict = field(default_factory=dict)

    @property
    def edges(self) -> list:
        return [f.curve for f in self.fits if f is not None]

    def point_types(self) -> np.ndarray:
        t = np.full(len(self.mask), -1, np.int64)
        for idx, f in zip(self.segments.segments, self.fits):
            if f is not None:
                t[idx] = int(f.kind)
        return t

    def channels(self) -> dict:
        return {"pred_label": self.mask.astype(np.uint8),
                "pred_offset_x": self.offsets[:, 0], "pred_offset_y": self.offsets[:, 1],
                "pred_offset_z": self.offsets[:, 2],
                "pred_segment": self.segments.labels().astype(np.int32),
                "pred_type": self.point_types().astype(np.int32)}

    def to_json_dict(self) -> dict:
        edges, residuals, seg_of_edge = [], [], []
        for k, f in enumerate(self.fits):
            if f is None:
                continue
            edges.append(curve_to_dict(f.curve))
            residuals.append(float(f.residual))
            seg_of_edge.append(k)
        return {"edges": edges, "residuals": residuals, "edge_segment": seg_of_edge,
                "segments": [s.tolist() for s in self.segments.segments],
                "mask": np.flatnonzero(self.mask).tolist(),
                "n_points": int(self.segments.n_points), "tau": float(self.tau),
                "flags": self.flags}


def predict_from_annotations(cloud, ann: PointAnnotations, config: PipelineConfig) -> Prediction:
    """Fitting stage in isolation: ground-truth mask, offsets and segments."""
    x = cloud.positions
    mask = ann.edge_label.copy()
    cons = np.array(x, float)
    cons[mask] = consolidate(x, mask, ann.offset)
    segments = ann.segments()
    fits = fit_segments(cons, segments, config.fit_config(), use_types=True)
    if config.snap_corners:
        fits = snap_corners(fits, config.snap_link_factor * ann.tau, config.corner_angle_deg)
    return Prediction(mask, np.where(mask[:, None], ann.offset, 0.0), segments, fits, ann.tau,
                      {"mode": "ground_truth"})


def predict_from_detection(cloud, config: PipelineConfig) -> Prediction:
    """Detection baseline: curvature mask, local-line offsets, density clustering, fitting."""
    x = cloud.positions
    tau = config.tau(x)
    mask = detect_sharp_points(cloud, config.detect_percentile, config.detect_threshold,
                               config.detect_min_curvature)
    n = len(x)
    flags = {"mode": "detection"}
    if not mask.any():
        warnings.warn("no sharp points detected", EmptyResultWarning, stacklevel=2)
        flags["empty"] = True
        return Prediction(mask, np.zeros((n, 3)), SegmentSet([], [], n), [], tau, flags)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TooFewNeighborsWarning)
        offsets, too_few = estimate_offsets(x, mask, tau, config.offset_k)
    flags["too_few_neighbors"] = int(too_few.sum())
    cons = consolidate(x, mask, offsets)
    local = cluster_segments(cons, config.eps_factor * tau, config.min_pts, config.corner_angle_deg)
    idx = np.flatnonzero(mask)
    segments = SegmentSet([idx[s] for s in local.segments], [None] * len(local), n,
                          dict(local.extras))
    full = np.array(x, float)
    full[mask] = cons
    fits = fit_segments(full, segments, config.fit_config())
    if config.merge_segments:
        segments, fits = merge_segments(full, segments, fits, config.fit_config(),
                                        config.merge_link_factor * tau, config.corner_angle_deg)
    if config.snap_corners:
        fits = snap_corners(fits, config.snap_link_factor * tau, config.corner_angle_deg)
    segments = SegmentSet(segments.segments, [f.kind if f is not None else None for f in fits], n,
                          dict(segments.extras))
    if not any(f is not None for f in fits):
        warnings.warn("no edges were fitted", EmptyResultWarning, stacklevel=2)
        flags["empty"] = True
    return Prediction(mask, offsets, segments, fits, tau, flags)


def evaluate_prediction(model_id, pred: Prediction, ann: PointAnnotations, gt_edges,
                        config: PipelineConfig) -> EvalReport:
    return evaluate(model_id, pred.mask, ann.edge_label, pred.segments, ann.segments(),
                    pred.edges, list(gt_edges), config.ecd_samples, False, config.empty_penalty)


# --------------------------------------------------------------- loss report

PRED_CHANNELS = ("pred_label", "pred_offset_x", "pred_offset_y", "pred_offset_z", "pred_segment",
                 "pred_type")
N_TYPES = len(PrimitiveType)


def _pred_channels(cloud):
    missing = [k for k in PRED_CHANNELS if k not in cloud.channels]
    if missing:
        raise MissingChannel(f"prediction channels missing: {missing}")
    return {k: np.asarray(cloud.channels[k]) for k in PRED_CHANNELS}


def _triplets(seg_id, rng):
    """One (anchor, positive, negative) index triple per edge point with a valid partner."""
    idx = np.flatnonzero(seg_id >= 0)
    ids = np.unique(seg_id[idx])
    if len(ids) < 2:
        return np.zeros((3, 0), np.int64)
    members = {k: idx[seg_id[idx] == k] for k in ids}
    a_out, p_out, n_out = [], [], []
    for k in ids:
        own = members[k]
        if len(own) < 2:
            continue
        others = idx[seg_id[idx] != k]
        shift = rng.integers(1, len(own), len(own))
        a_out.append(own)
        p_out.append(own[(np.arange(len(own)) + shift) % len(own)])
        n_out.append(others[rng.integers(0, len(others), len(own))])
    if not a_out:
        return np.zeros((3, 0), np.int64)
    return np.array([np.concatenate(a_out), np.concatenate(p_out), np.concatenate(n_out)])


def fit_pairs(pred_doc: dict, gt_segments: SegmentSet, gt_edges):
    """Predicted and ground-truth curves paired through IoU-maximizing segment matching."""
    pred_segs = [np.asarray(s, np.int64) for s in pred_doc.get("segments", [])]
    curve_of = {int(k): curve_from_dict(e)
                for k, e in zip(pred_doc.get("edge_segment", []), pred_doc.get("edges", []))}
    gt_ids = gt_segments.extras.get("ids", list(range(len(gt_segments))))
    m = iou_matrix(pred_segs, gt_segments)
    pred_c, gt_c = [], []
    for i, j in zip(*hungarian_match(m)):
        if m[i, j] > 0 and int(i) in curve_of and 0 <= gt_ids[j] < len(gt_edges):
            pred_c.append(curve_of[int(i)])
            gt_c.append(gt_edges[gt_ids[j]])
    return pred_c, gt_c


def loss_report(cloud, config: PipelineConfig, pred_doc: dict | None = None, gt_edges=None) -> dict:
    """Every loss term for a cloud carrying annotation and prediction channels.

    The edge probability is ``pred_prob`` when present, otherwise the hard
    predicted label; the embedding used by the triplet term is the one-hot
    predicted segment. The fitting term needs ``pred_doc`` (prediction JSON)
    and ``gt_edges``; without them it is reported as ``None``.
    """
    w = config.loss_weights()
    ann = PointAnnotations.from_channels(cloud.channels, config.tau(cloud.positions))
    ch = _pred_channels(cloud)
    y = ann.edge_label
    prob = np.asarray(cloud.channels.get("pred_prob", ch["pred_label"]), float)
    l_e = focal_loss(prob, y, w.eta)
    pred_off = np.c_[ch["pred_offset_x"], ch["pred_offset_y"], ch["pred_offset_z"]].astype(float)
    l_o = offset_loss(pred_off[y], ann.offset[y])
    ptype = ch["pred_type"].astype(np.int64)
    tprob = np.full((len(ptype), N_TYPES), 1.0 / N_TYPES)
    known = ptype >= 0
    tprob[known] = np.eye(N_TYPES)[ptype[known]]
    gtype = ann.primitive_type.astype(np.int64)
    typed = y & (gtype >= 0)
    l_t = type_cross_entropy(tprob[typed], gtype[typed])
    pseg = ch["pred_segment"].astype(np.int64)
    n_seg = int(pseg.max()) + 1 if len(pseg) and pseg.max() >= 0 else 0
    trip = _triplets(np.where(y, ann.segment_id, -1), np.random.default_rng(config.seed))
    if trip.shape[1] and n_seg:
        emb = np.zeros((len(pseg), n_seg))
        emb[pseg >= 0, pseg[pseg >= 0]] = 1.0
        l_emb = triplet_loss(emb[trip[0]], emb[trip[1]], emb[trip[2]], w.theta)
    elif trip.shape[1]:
        l_emb = float(w.theta * trip.shape[1])
    else:
        l_emb = 0.0
    l_dcmp = decomposition_loss(l_e, l_o, l_t, l_emb, w)
    l_fit = None
    if pred_doc is not None and gt_edges is not None:
        if int(pred_doc.get("n_points", len(cloud))) != len(cloud):
            raise ShapeMismatch("prediction and cloud differ in point count")
        pc, gc = fit_pairs(pred_doc, ann.segments(), list(gt_edges))
        l_fit = fitting_residual_loss(pc, gc)
    report = {
        "focal": l_e, "offset": l_o, "type": l_t, "embedding": l_emb,
        "decomposition": l_dcmp, "fitting": l_fit,
        "contributions": {"edge": w.alpha_e * l_e, "offset": w.alpha_o * l_o,
                          "type": w.alpha_t * l_t, "embedding": w.alpha_emb * l_emb,
                          "decomposition": w.alpha * l_dcmp,
                          "fitting": None if l_fit is None else w.beta * l_fit},
        "total": total_loss(l_dcmp, 0.0 if l_fit is None else l_fit, w.alpha, w.beta),
        "n_points": len(cloud), "n_edge_points": int(y.sum()), "n_triplets": int(trip.shape[1]),
        "weights": w.to_dict(), "prob_clamp": PROB_CLAMP,
    }
    return report


# ----------------------------------------------------------------- benchmark

def benchmark_model(index: int, seed: int, config: PipelineConfig):
    """Smoothed, normalized synthetic model ``index`` of the benchmark suite."""
    kind = BENCHMARK_KINDS[index % len(BENCHMARK_KINDS)]
    s = seed + index
    model = gen_primitive_solid(kind, random_params(kind, s), config.resolution, seed=s)
    model = smooth_edges(model, config.smoothing_rounds, config.smoothing_lambda)
    return normalize_model(model)


@dataclass
class ModelRun:
    model_id: str
    ground_truth: EvalReport
    detection: EvalReport
    gt_prediction: Prediction
    det_prediction: Prediction


def run_model(model_id: str, mesh: TriMesh, gt_edges, config: PipelineConfig, seed: int) -> ModelRun:
    cloud = sample_cloud(mesh, config, seed)
    ann = annotate_ground_truth(cloud, gt_edges, config.tau_fraction)
    gt_pred = predict_from_annotations(cloud, ann, config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyResultWarning)
        det_pred = predict_from_detection(cloud, config)
    return ModelRun(model_id,
                    evaluate_prediction(model_id, gt_pred, ann, gt_edges, config),
                    evaluate_prediction(model_id, det_pred, ann, gt_edges, config),
                    gt_pred, det_pred)


def run_benchmark(count: int = 30, config: PipelineConfig | None = None, seed: int = 0):
    """Run both pipeline modes on ``count`` benchmark models."""
    config = config or PipelineConfig()
    runs = []
    for i in range(count):
        model = benchmark_model(i, seed, config)
        mid = f"{model.recipe['kind']}_{i:03d}"
        runs.append(run_model(mid, model.mesh, model.edges, config, seed + i))
    return runs


def summarize_benchmark(runs) -> dict:
    """Mean metrics per mode; edge-point recall is the detection recall."""
    out = {}
    for mode in ("ground_truth", "detection"):
        reps = [getattr(r, mode) for r in runs]
        out[mode] = {k: float(np.mean([getattr(x, k) for x in reps]))
                     for k in ("precision", "recall", "iou", "siou", "ecd")}
    out["count"] = len(runs)
    return out
