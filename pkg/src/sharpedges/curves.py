"""Parametric edge curves: line segments, circular arcs and clamped b-splines.

All distance and evaluation helpers accept a single point ``(3,)`` or a batch
``(n, 3)`` and return matching shapes.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParam, OutOfRange, ParseError

TWO_PI = 2.0 * math.pi
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SPLINE_SEARCH_SAMPLES = 1024


class PrimitiveType(enum.IntEnum):
    """Edge primitive kinds; integer order is the parsimony order."""

    LINE = 0
    CIRCLE = 1
    BSPLINE = 2

    @property
    def label(self) -> str:
        return {0: "line", 1: "circle", 2: "bspline"}[int(self)]

    @classmethod
    def from_label(cls, s: str) -> "PrimitiveType":
        try:
            return {"line": cls.LINE, "circle": cls.CIRCLE, "bspline": cls.BSPLINE}[s]
        except KeyError:
            raise ParseError(f"unknown curve type {s!r}") from None


def _vec(x) -> np.ndarray:
    a = np.array(x, dtype=float).reshape(3)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LineSegment:
    x_start: np.ndarray
    x_end: np.ndarray

    kind = PrimitiveType.LINE

    def __post_init__(self):
        object.__setattr__(self, "x_start", _vec(self.x_start))
        object.__setattr__(self, "x_end", _vec(self.x_end))
        if not self.length > 0:
            raise InvalidParam("line segment with coincident endpoints")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.x_end - self.x_start))

    @property
    def direction(self) -> np.ndarray:
        return (self.x_end - self.x_start) / self.length

    @property
    def bounds(self) -> tuple[float, float]:
        return 0.0, self.length


@dataclass(frozen=True, eq=False)
class CircularArc:
    """Arc ``center + u cos t + v sin t`` with ``u = start - center`` and
    ``v = rotation_dir * (u x plane_normal)``, for ``t`` in ``[0, sweep]``."""

    center: np.ndarray
    x_start: np.ndarray
    x_end: np.ndarray
    radius: float
    rotation_dir: int
    plane_normal: np.ndarray
    is_full_circle: bool = False
    sweep: float = field(init=False)

    kind = PrimitiveType.CIRCLE

    def __post_init__(self):
        for name in ("center", "x_start", "x_end"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        n = np.asarray(self.plane_normal, float).reshape(3)
        nn = np.linalg.norm(n)
        if not nn > 0:
            raise InvalidParam("zero plane normal")
        object.__setattr__(self, "plane_normal", _vec(n / nn))
        r = float(self.radius)
        if not r > 0:
            raise InvalidParam("radius must be positive")
        object.__setattr__(self, "radius", r)
        if self.rotation_dir not in (1, -1):
            raise InvalidParam("rotation_dir must be +1 or -1")
        object.__setattr__(self, "rotation_dir", int(self.rotation_dir))
        tol = 1e-7 * r
        for p in (self.x_start, self.x_end):
            d = p - self.center
            if abs(np.linalg.norm(d) - r) > tol or abs(d @ self.plane_normal) > tol:
                raise InvalidParam("arc endpoint off the circle")
        if self.is_full_circle:
            sweep = TWO_PI
        else:
            ang = self.angle_of(self.x_end)
            sweep = ang if ang > 1e-12 else TWO_PI
        object.__setattr__(self, "sweep", float(sweep))

    @property
    def u(self) -> np.ndarray:
        return self.x_start - self.center

    @property
    def v(self) -> np.ndarray:
        return self.rotation_dir * np.cross(self.u, self.plane_normal)

    @property
    def bounds(self) -> tuple[float, float]:
        return 0.0, self.sweep

    def angle_of(self, x) -> np.ndarray:
        """Angle of ``x`` in the arc's (u, v) frame, mapped to ``[0, 2pi)``."""
        p = np.asarray(x, float) - self.center
        a = np.arctan2(p @ self.v, p @ self.u)
        return np.mod(a, TWO_PI)

    @classmethod
    def from_frame(cls, center, normal, radius, start_dir, sweep, rotation_dir=1) -> "CircularArc":
        """Arc starting at ``center + radius * start_dir`` sweeping ``sweep`` radians."""
        n = np.asarray(normal, float)
        n = n / np.linalg.norm(n)
        d = np.asarray(start_dir, float)
        d = d - (d @ n) * n
        d = d / np.linalg.norm(d)
        c = np.asarray(center, float)
        u = radius * d
        v = rotation_dir * np.cross(u, n)
        full = sweep >= TWO_PI - 1e-12
        end = c + u if full else c + u * math.cos(sweep) + v * math.sin(sweep)
        return cls(c, c + u, end, radius, rotation_dir, n, full)


@dataclass(frozen=True, eq=False)
class BSplineCurve:
    degree: int
    control_points: np.ndarray
    knots: np.ndarray

    kind = PrimitiveType.BSPLINE

    def __post_init__(self):
        cp = np.array(self.control_points, float).reshape(-1, 3)
        kn = np.array(self.knots, float).ravel()
        p = int(self.degree)
        if p < 1:
            raise InvalidParam("degree must be >= 1")
        if len(cp) < p + 1:
            raise InvalidParam("need at least degree + 1 control points")
        if len(kn) != len(cp) + p + 1:
            raise InvalidParam("knot vector length must be n_ctrl + degree + 1")
        if np.any(np.diff(kn) < 0):
            raise InvalidParam("knots must be non-decreasing")
        if not (np.all(kn[:p + 1] == kn[0]) and np.all(kn[-p - 1:] == kn[-1])):
            raise InvalidParam("knot vector must be clamped")
        if not kn[-1] > kn[0]:
            raise InvalidParam("empty parameter domain")
        _, mult = np.unique(kn[p + 1:-p - 1], return_counts=True)
        if len(mult) and mult.max() > p:
            raise InvalidParam("interior knot multiplicity exceeds degree")
        cp.flags.writeable = False
        kn.flags.writeable = False
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "knots", kn)

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @classmethod
    def clamped_uniform(cls, control_points, degree: int = 3) -> "BSplineCurve":
        """Clamped spline on ``[0, 1]`` with uniformly spaced interior knots."""
        n = len(control_points)
        inner = np.linspace(0, 1, n - degree + 1)[1:-1]
        kn = np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])
        return cls(degree, control_points, kn)


EdgeCurve = Union[LineSegment, CircularArc, BSplineCurve]


# ------------------------------------------------------------------ evaluation

def _check_range(t, lo, hi, slack=1e-12):
    t = np.asarray(t, float)
    span = max(hi - lo, 1.0)
    if np.any(t < lo - slack * span) or np.any(t > hi + slack * span):
        raise OutOfRange(f"parameter outside [{lo}, {hi}]")
    return np.clip(t, lo, hi)


def eval_line(c: LineSegment, t) -> np.ndarray:
    """Point ``x_start + t * u`` for arc-length parameter ``t``."""
    t = _check_range(t, *c.bounds)
    return c.x_start + np.multiply.outer(t, c.direction)


def eval_arc(c: CircularArc, t) -> np.ndarray:
    t = _check_range(t, *c.bounds)
    return c.center + np.multiply.outer(np.cos(t), c.u) + np.multiply.outer(np.sin(t), c.v)


def find_span(knots, degree, t) -> np.ndarray:
    """Knot span index ``i`` with ``knots[i] <= t < knots[i+1]`` (last span closed)."""
    n = len(knots) - degree - 1
    s = np.searchsorted(knots, t, side="right") - 1
    return np.clip(s, degree, n - 1)


def basis_functions(knots, degree, t):
    """Non-zero basis function values at ``t`` (Cox-de Boor triangle).

    Returns ``(span, values)`` where ``values[k, j]`` is ``N_{span[k]-degree+j}``.
    """
    t = np.atleast_1d(np.asarray(t, float))
    span = find_span(knots, degree, t)
    m = len(t)
    vals = np.zeros((m, degree + 1))
    vals[:, 0] = 1.0
    left = np.zeros((m, degree + 1))
    right = np.zeros((m, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = t - knots[span + 1 - j]
        right[:, j] = knots[span + j] - t
        saved = np.zeros(m)
        for r in range(j):
            den = right[:, r + 1] + left[:, j - r]
            tmp = np.divide(vals[:, r], den, out=np.zeros(m), where=den != 0)
            vals[:, r] = saved + right[:, r + 1] * tmp
            saved = left[:, j - r] * tmp
        vals[:, j] = saved
    return span, vals


def basis_matrix(knots, degree, n_ctrl, t) -> np.ndarray:
    """Dense ``(len(t), n_ctrl)`` collocation matrix."""
    span, vals = basis_functions(knots, degree, t)
    out = np.zeros((len(span), n_ctrl))
    rows = np.arange(len(span))[:, None]
    out[rows, span[:, None] - degree + np.arange(degree + 1)] = vals
    return out


def eval_bspline(c: BSplineCurve, t) -> np.ndarray:
    t_arr = _check_range(t, *c.bounds)
    span, vals = basis_functions(c.knots, c.degree, t_arr)
    idx = span[:, None] - c.degree + np.arange(c.degree + 1)
    pts = np.einsum("kj,kjd->kd", vals, c.control_points[idx])
    return pts.reshape(np.shape(t_arr) + (3,))


def eval_curve(c: EdgeCurve, t) -> np.ndarray:
    if isinstance(c, LineSegment):
        return eval_line(c, t)
    if isinstance(c, CircularArc):
        return eval_arc(c, t)
    return eval_bspline(c, t)


def sample_params(c: EdgeCurve, m: int) -> np.ndarray:
    if m < 2:
        raise InvalidParam("need at least 2 samples")
    lo, hi = c.bounds
    if isinstance(c, CircularArc) and c.is_full_circle:
        return np.arange(m) * (TWO_PI / m)
    return np.linspace(lo, hi, m)


def sample_curve(c: EdgeCurve, m: int) -> np.ndarray:
    """``m`` points at uniform parameter steps, endpoints included.

    Full circles are sampled on ``[0, 2pi)`` so the start point is not repeated.
    """
    return eval_curve(c, sample_params(c, m))


# ------------------------------------------------------------------- distances

def closest_point_line(x, c: LineSegment):
    """Nearest point on the segment and its parameter (clamped to the segment)."""
    x = np.asarray(x, float)
    t = np.clip((x - c.x_start) @ c.direction, 0.0, c.length)
    return c.x_start + np.multiply.outer(t, c.direction), t


def dist_line(x, c: LineSegment):
    p, _ = closest_point_line(x, c)
    return np.linalg.norm(np.asarray(x, float) - p, axis=-1)


def dist_circle_paper(x, c: CircularArc):
    """Radial distance ``| ||x - center|| - r |``; ignores the plane and arc extent."""
    return np.abs(np.linalg.norm(np.asarray(x, float) - c.center, axis=-1) - c.radius)


def closest_point_arc(x, c: CircularArc):
    x = np.asarray(x, float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    uhat = c.u / c.radius
    vhat = c.v / c.radius
    p = x - c.center
    a = np.mod(np.arctan2(p @ vhat, p @ uhat), TWO_PI)
    if c.is_full_circle:
        t = a
    else:
        inside = a <= c.sweep
        d_start = np.linalg.norm(x - c.x_start, axis=1)
        d_end = np.linalg.norm(x - c.x_end, axis=1)
        t = np.where(inside, a, np.where(d_start <= d_end, 0.0, c.sweep))
    q = c.center + c.radius * (np.outer(np.cos(t), uhat) + np.outer(np.sin(t), vhat))
    if single:
        return q[0], t[0]
    return q, t


def dist_arc_exact(x, c: CircularArc):
    """Euclidean distance to the bounded arc."""
    q, _ = closest_point_arc(x, c)
    return np.linalg.norm(np.asarray(x, float) - q, axis=-1)


def closest_point_bspline(x, c: BSplineCurve, samples: int = SPLINE_SEARCH_SAMPLES, iters: int = 60):
    """Dense parameter search followed by golden-section refinement."""
    x = np.asarray(x, float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    lo, hi = c.bounds
    ts = np.linspace(lo, hi, samples)
    pts = eval_bspline(c, ts)
    _, best = cKDTree(pts).query(x)
    a = ts[np.maximum(best - 1, 0)]
    b = ts[np.minimum(best + 1, samples - 1)]

    def f(t):
        return ((eval_bspline(c, t) - x) ** 2).sum(-1)

    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        left = f1 < f2
        # left: minimum in [a, x2]; otherwise in [x1, b]
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        new_x1 = np.where(left, b - _GOLDEN * (b - a), x2)
        new_x2 = np.where(left, x1, a + _GOLDEN * (b - a))
        fe = f(np.where(left, new_x1, new_x2))
        f1, f2 = np.where(left, fe, f2), np.where(left, f1, fe)
        x1, x2 = new_x1, new_x2
    t = 0.5 * (a + b)
    # the dense sample itself may beat the refined interior point at the ends
    cand = np.stack([t, ts[best]], axis=1)
    fc = np.stack([f(cand[:, 0]), f(cand[:, 1])], axis=1)
    t = cand[np.arange(len(x)), np.argmin(fc, axis=1)]
    q = eval_bspline(c, t)
    if single:
        return q[0], t[0]
    return q, t


def closest_point(x, c: EdgeCurve):
    """Nearest point on ``c`` for each query point, plus its curve parameter."""
    if isinstance(c, LineSegment):
        return closest_point_line(x, c)
    if isinstance(c, CircularArc):
        return closest_point_arc(x, c)
    return closest_point_bspline(x, c)


def dist_curve(x, c: EdgeCurve):
    q, _ = closest_point(x, c)
    return np.linalg.norm(np.asarray(x, float) - q, axis=-1)


# ------------------------------------------------------------- transformations

def transform_curve(c: EdgeCurve, fn, scale: float) -> EdgeCurve:
    """Apply a similarity ``fn`` (points) whose uniform scale factor is ``scale``."""
    if isinstance(c, LineSegment):
        return LineSegment(fn(c.x_start), fn(c.x_end))
    if isinstance(c, CircularArc):
        center = fn(c.center)
        start = fn(c.x_start)
        # the normal follows the rotational part of fn
        tip = fn(c.center + c.plane_normal * c.radius) - center
        end = fn(c.x_end)
        n = tip / np.linalg.norm(tip)
        r = float(np.linalg.norm(start - center))
        return CircularArc(center, start, end, r, c.rotation_dir, n, c.is_full_circle)
    return BSplineCurve(c.degree, fn(c.control_points), c.knots)


def reverse_curve(c: EdgeCurve) -> EdgeCurve:
    """Same point set traversed in the opposite direction."""
    if isinstance(c, LineSegment):
        return LineSegment(c.x_end, c.x_start)
    if isinstance(c, CircularArc):
        if c.is_full_circle:
            return CircularArc(c.center, c.x_start, c.x_end, c.radius, -c.rotation_dir, c.plane_normal, True)
        return CircularArc(c.center, c.x_end, c.x_start, c.radius, -c.rotation_dir, c.plane_normal, False)
    lo, hi = c.bounds
    return BSplineCurve(c.degree, c.control_points[::-1], (lo + hi) - c.knots[::-1])


# ------------------------------------------------------------------------ JSON

def curve_to_dict(c: EdgeCurve) -> dict:
    if isinstance(c, LineSegment):
        return {"type": "line", "start": c.x_start.tolist(), "end": c.x_end.tolist()}
    if isinstance(c, CircularArc):
        return {
            "type": "circle", "center": c.center.tolist(), "start": c.x_start.tolist(),
            "end": c.x_end.tolist(), "radius": c.radius, "normal": c.plane_normal.tolist(),
            "rotation": c.rotation_dir, "full": bool(c.is_full_circle),
        }
    return {"type": "bspline", "degree": c.degree, "knots": c.knots.tolist(),
            "control_points": c.control_points.tolist()}


def curve_from_dict(d: dict) -> EdgeCurve:
    try:
        kind = PrimitiveType.from_label(d["type"])
        if kind is PrimitiveType.LINE:
            return LineSegment(d["start"], d["end"])
        if kind is PrimitiveType.CIRCLE:
            return CircularArc(d["center"], d["start"], d["end"], d["radius"],
                               int(d.get("rotation", 1)), d["normal"], bool(d.get("full", False)))
        return BSplineCurve(int(d["degree"]), d["control_points"], d["knots"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParam):
            raise ParseError(f"invalid curve: {exc}") from None
        raise ParseError(f"malformed curve record: {exc!r}") from None


def edges_to_json(edges, **extra) -> str:
    """Canonical EdgeSet JSON. Floats use Python's shortest round-trip repr."""
    doc = {"edges": [curve_to_dict(c) for c in edges]}
    doc.update(extra)
    return json.dumps(doc, indent=1, sort_keys=True)


def edges_from_json(text: str) -> list:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from None
    recs = doc["edges"] if isinstance(doc, dict) else doc
    return [curve_from_dict(d) for d in recs]
