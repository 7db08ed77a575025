"""Evaluation metrics: point classification, segment IoU and edge Chamfer distance."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .curves import sample_curve
from .errors import ShapeMismatch

DEFAULT_ECD_SAMPLES = 512
EMPTY_SIDE_PENALTY = 1.0
CSV_FIELDS = ("model_id", "precision", "recall", "iou", "siou", "ecd")


def classification_metrics(pred_mask, gt_mask):
    """Precision, recall and IoU of a binary prediction.

    Precision (recall) is 0 when nothing is predicted (nothing is true);
    IoU is 1 when both masks are empty.
    """
    p = np.asarray(pred_mask, bool)
    g = np.asarray(gt_mask, bool)
    if p.shape != g.shape:
        raise ShapeMismatch("masks differ in shape")
    tp = int((p & g).sum())
    fp = int((p & ~g).sum())
    fn = int((~p & g).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    iou = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    return precision, recall, iou


def pooled_classification_metrics(pred_masks, gt_masks):
    """Classification metrics over the concatenation of several models."""
    return classification_metrics(np.concatenate([np.asarray(m, bool) for m in pred_masks]),
                                  np.concatenate([np.asarray(m, bool) for m in gt_masks]))


def _index_sets(segs):
    if hasattr(segs, "segments"):
        segs = segs.segments
    return [np.unique(np.asarray(s, np.int64)) for s in segs]


def iou_matrix(pred_segments, gt_segments) -> np.ndarray:
    """``(n_pred, n_gt)`` matrix of index-set IoUs."""
    ps, gs = _index_sets(pred_segments), _index_sets(gt_segments)
    out = np.zeros((len(ps), len(gs)))
    for i, a in enumerate(ps):
        for j, b in enumerate(gs):
            inter = len(np.intersect1d(a, b, assume_unique=True))
            union = len(a) + len(b) - inter
            out[i, j] = inter / union if union else 0.0
    return out


def hungarian_match(iou: np.ndarray):
    """Assignment maximizing total IoU; returns ``(pred_idx, gt_idx)`` arrays."""
    iou = np.asarray(iou, float)
    if iou.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    r, c = linear_sum_assignment(iou, maximize=True)
    return r.astype(np.int64), c.astype(np.int64)


def siou(pred_segments, gt_segments, return_matches: bool = False):
    """Mean matched IoU over ground-truth segments (unmatched ones count 0).

    Both sides empty gives 1, exactly one side empty gives 0.
    """
    m = iou_matrix(pred_segments, gt_segments)
    n_pred, n_gt = m.shape
    if n_gt == 0 or n_pred == 0:
        val = 1.0 if n_gt == n_pred else 0.0
        return (val, []) if return_matches else val
    r, c = hungarian_match(m)
    val = float(m[r, c].sum() / n_gt)
    if return_matches:
        return val, [(int(i), int(j), float(m[i, j])) for i, j in zip(r, c)]
    return val


def _edge_samples(edges, m):
    if not edges:
        return np.zeros((0, 3))
    return np.vstack([sample_curve(c, m) for c in edges])


def edge_chamfer_distance(pred, gt, m: int = DEFAULT_ECD_SAMPLES, squared: bool = False,
                          empty_penalty: float = EMPTY_SIDE_PENALTY) -> float:
    """Symmetric mean-of-means nearest-sample distance between two edge sets.

    Each curve contributes ``m`` uniform parameter samples. Two empty sets
    give 0; exactly one empty set gives ``empty_penalty``.
    """
    a, b = _edge_samples(pred, m), _edge_samples(gt, m)
    if len(a) == 0 or len(b) == 0:
        return 0.0 if len(a) == len(b) else float(empty_penalty)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    if squared:
        d_ab, d_ba = d_ab ** 2, d_ba ** 2
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


@dataclass
class EvalReport:
    model_id: str
    precision: float
    recall: float
    iou: float
    siou: float
    ecd: float
    matches: list = field(default_factory=list)
    empty_side: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list:
        return [self.model_id] + [_fmt(getattr(self, k)) for k in CSV_FIELDS[1:]]


def _fmt(v: float) -> str:
    return repr(float(v))


def evaluate(model_id, pred_mask, gt_mask, pred_segments, gt_segments, pred_edges, gt_edges,
             m: int = DEFAULT_ECD_SAMPLES, squared: bool = False,
             empty_penalty: float = EMPTY_SIDE_PENALTY) -> EvalReport:
    p, r, i = classification_metrics(pred_mask, gt_mask)
    s, matches = siou(pred_segments, gt_segments, return_matches=True)
    e = edge_chamfer_distance(pred_edges, gt_edges, m, squared, empty_penalty)
    empty = (len(pred_edges) == 0) != (len(gt_edges) == 0)
    return EvalReport(str(model_id), p, r, i, s, e, matches, empty)


def mean_report(reports, model_id: str = "mean") -> EvalReport:
    """Per-model average of the scalar metrics."""
    if not reports:
        return EvalReport(model_id, math.nan, math.nan, math.nan, math.nan, math.nan)
    vals = {k: float(np.mean([getattr(r, k) for r in reports])) for k in CSV_FIELDS[1:]}
    return EvalReport(model_id, **vals)


def reports_csv(reports, include_mean: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow(r.csv_row())
    if include_mean:
        w.writerow(mean_report(reports).csv_row())
    return buf.getvalue()
