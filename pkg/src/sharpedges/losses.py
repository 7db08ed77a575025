"""Value-only implementations of the training losses.

No gradients are computed; the functions serve verification and diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .curves import CircularArc, LineSegment, dist_circle_paper, dist_line, sample_curve
from .errors import InvalidParam, ShapeMismatch

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class LossWeights:
    alpha_e: float = 1.0
    alpha_o: float = 10.0
    alpha_t: float = 2.0
    alpha_emb: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    eta: float = 1.5
    theta: float = 0.5

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParam(f"loss weight {k} must be finite and non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def focal_loss(probs, labels, eta: float = 1.5) -> float:
    """Sum of ``-(1 - p*)^eta log p*`` with ``p*`` the probability of the true class."""
    p = np.clip(np.asarray(probs, float), PROB_CLAMP, 1 - PROB_CLAMP)
    y = np.asarray(labels, bool)
    if p.shape != y.shape:
        raise ShapeMismatch("probs and labels differ in shape")
    ps = np.where(y, p, 1 - p)
    return float(np.sum(-((1 - ps) ** eta) * np.log(ps)))


def offset_loss(pred, truth) -> float:
    """Sum of Euclidean norms of the offset errors."""
    a, b = np.asarray(pred, float), np.asarray(truth, float)
    if a.shape != b.shape:
        raise ShapeMismatch("pred and truth differ in shape")
    return float(np.linalg.norm((a - b).reshape(len(a), -1), axis=1).sum()) if a.size else 0.0


def triplet_loss(anchors, positives, negatives, theta: float = 0.5) -> float:
    """Sum of hinge terms ``max(|a - p| - |a - n| + theta, 0)``."""
    a, p, n = (np.atleast_2d(np.asarray(v, float)) for v in (anchors, positives, negatives))
    if not (a.shape == p.shape == n.shape):
        raise ShapeMismatch("anchor, positive and negative arrays differ in shape")
    d_ap = np.linalg.norm(a - p, axis=1)
    d_an = np.linalg.norm(a - n, axis=1)
    return float(np.maximum(d_ap - d_an + theta, 0.0).sum())


def decomposition_loss(l_e, l_o, l_t, l_emb, w: LossWeights = LossWeights()) -> float:
    """Weighted sum of the edge, offset, type and embedding terms."""
    parts = (l_e, l_o, l_t, l_emb)
    if not all(math.isfinite(v) for v in parts):
        raise InvalidParam("loss parts must be finite")
    return float(w.alpha_e * l_e + w.alpha_o * l_o + w.alpha_t * l_t + w.alpha_emb * l_emb)


def _segment_distance(x, ref, m):
    """Distance of points to a reference primitive, or Chamfer for splines."""
    if isinstance(ref, LineSegment):
        return dist_line(x, ref)
    if isinstance(ref, CircularArc):
        return dist_circle_paper(x, ref)
    d, _ = cKDTree(sample_curve(ref, m)).query(x)
    return d


def fitting_residual_loss(pred_curves, gt_curves, m: int = 64) -> float:
    """Sum over matched pairs of the mean distance of ``m`` predicted samples to the truth.

    Line and circle truths use their analytic distances (the circle one is
    radial); b-spline truths use nearest distances to ``m`` truth samples.
    """
    if len(pred_curves) != len(gt_curves):
        raise ShapeMismatch("predicted and ground-truth curve counts differ")
    total = 0.0
    for p, g in zip(pred_curves, gt_curves):
        xs = sample_curve(p, m)
        total += float(np.mean(_segment_distance(xs, g, m)))
    return total


def total_loss(l_dcmp: float, l_fit: float, alpha: float = 1.0, beta: float = 1.0) -> float:
    return float(alpha * l_dcmp + beta * l_fit)


def type_cross_entropy(type_probs, labels) -> float:
    """Summed cross-entropy of per-point primitive-type probabilities."""
    pr = np.clip(np.asarray(type_probs, float), PROB_CLAMP, 1.0)
    y = np.asarray(labels, np.int64)
    if pr.ndim != 2 or len(pr) != len(y):
        raise ShapeMismatch("type_probs must be (n, k) with one label per row")
    return float(-np.log(pr[np.arange(len(y)), y]).sum()) + 0.0 if len(y) else 0.0
