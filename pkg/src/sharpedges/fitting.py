"""Weighted least-squares fitting of lines, circles and b-splines to edge points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree
from scipy.spatial import cKDTree

from .curves import (BSplineCurve, CircularArc, LineSegment, PrimitiveType, TWO_PI, basis_functions, basis_matrix,
                     closest_point_bspline, curve_to_dict, dist_circle_paper, eval_bspline)
from .errors import DegenerateInput, InsufficientPoints, InvalidParam, SingularSystem

ARC_GAP_DEG = 30.0
SPLINE_TOLERANCE = 0.01
MAX_CONTROL_POINTS = 64
FREE_KNOT_LIMIT = 16
STALL_TOL = 1e-6
EXACT_TOL = 1e-12
PARAM_EXPONENTS = (1.0, 0.5, 0.0)
TRIAGE_ITER = 10
ACCEPT_THRESHOLD = 0.01


@dataclass(frozen=True, eq=False)
class WeightedPoints:
    """Points with non-negative membership weights; zero weight means excluded."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, float).reshape(-1, 3)
        w = np.asarray(self.weights, float).ravel()
        if len(w) != len(p):
            raise InvalidParam("points and weights differ in length")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidParam("weights must be finite and non-negative")
        if not w.sum() > 0:
            raise InvalidParam("weights sum to zero")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "WeightedPoints":
        p = np.asarray(points, float).reshape(-1, 3)
        return cls(p, np.ones(len(p)))

    def active(self):
        """Positive-weight points and their weights."""
        m = self.weights > 0
        return self.points[m], self.weights[m]


def _as_weighted(pts) -> WeightedPoints:
    return pts if isinstance(pts, WeightedPoints) else WeightedPoints.uniform(pts)


@dataclass(frozen=True, eq=False)
class FitResult:
    curve: object
    residual: float
    ordering: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def kind(self) -> PrimitiveType:
        return self.curve.kind

    def to_dict(self) -> dict:
        d = curve_to_dict(self.curve)
        d["residual"] = float(self.residual)
        return d


def _sign_fix(v):
    """Deterministic sign: first clearly nonzero component positive."""
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    return -v if len(nz) and v[nz[0]] < 0 else v


def _weighted_svd(x, w):
    mean = (w[:, None] * x).sum(0) / w.sum()
    a = np.sqrt(w)[:, None] * (x - mean)
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    if len(s) < 3:
        s = np.concatenate([s, np.zeros(3 - len(s))])
        vt = np.vstack([vt, np.zeros((3 - len(vt), 3))])
    return mean, s, vt


# ------------------------------------------------------------------------ line

def fit_line(pts) -> FitResult:
    """Weighted total-least-squares segment.

    The direction is the top right singular vector of the weight-scaled,
    mean-centered points; the endpoints are the extreme projections.
    ``extras["ambiguous"]`` is set when the two largest singular values tie.
    """
    x, w = _as_weighted(pts).active()
    if len(x) < 2:
        raise InsufficientPoints("line fit needs two weighted points")
    mean, s, vt = _weighted_svd(x, w)
    scale = max(1.0, float(np.abs(x).max()))
    if s[0] <= 1e-13 * scale * math.sqrt(w.sum()):
        raise DegenerateInput("all points coincide")
    u = _sign_fix(vt[0])
    t = (x - mean) @ u
    seg = LineSegment(mean + t.min() * u, mean + t.max() * u)
    perp = (x - mean) - np.outer(t, u)
    res = math.sqrt(float((w * (perp ** 2).sum(1)).sum() / w.sum()))
    return FitResult(seg, res, extras={"ambiguous": bool(s[0] - s[1] <= 1e-9 * s[0]),
                                       "singular_values": s.tolist()})


def fit_plane(pts):
    """Plane through the weighted centroid; normal is the least singular direction.

    Returns ``(normal, offset)`` with ``normal . x == offset`` on the plane.
    """
    x, w = _as_weighted(pts).active()
    if len(x) < 3:
        raise InsufficientPoints("plane fit needs three weighted points")
    mean, s, vt = _weighted_svd(x, w)
    if s[1] <= 1e-9 * max(s[0], 1e-300):
        raise DegenerateInput("points are collinear; plane normal is ambiguous")
    n = _sign_fix(vt[2])
    return n, float(n @ mean)


# ------------------------------------------------------------------- rotation

@dataclass(frozen=True, eq=False)
class RodriguesFrame:
    """Rotation by ``angle`` about the unit ``axis``."""

    axis: np.ndarray
    angle: float

    def _rotate(self, x, angle):
        x = np.asarray(x, float)
        k = self.axis
        c, s = math.cos(angle), math.sin(angle)
        return x * c + np.cross(k, x) * s + np.multiply.outer(x @ k, k) * (1 - c)

    def apply(self, x):
        return self._rotate(x, self.angle)

    def inverse(self, x):
        return self._rotate(x, -self.angle)

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(3)).T


def rodrigues_to_plane(pts, normal):
    """Rotate ``normal`` onto +z and return the rotated xy coordinates and frame."""
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    k = np.cross(n, z)
    kn = np.linalg.norm(k)
    if kn < 1e-12:
        if n[2] > 0:
            frame = RodriguesFrame(np.array([1.0, 0.0, 0.0]), 0.0)
        else:
            frame = RodriguesFrame(np.array([1.0, 0.0, 0.0]), math.pi)
    else:
        frame = RodriguesFrame(k / kn, math.acos(float(np.clip(n @ z, -1.0, 1.0))))
    rotated = frame.apply(np.asarray(pts, float))
    return rotated[..., :2], frame


# --------------------------------------------------------------------- circle

def fit_circle2d(pts2d, weights=None):
    """Algebraic weighted circle fit in 2D.

    Minimizes ``sum w (|c - x|^2 - r^2)^2``: eliminating ``r^2`` leaves a
    weighted linear system in the center, solved through its Cholesky-
    factored normal equations. Raises :class:`SingularSystem` for collinear
    input.
    """
    x = np.asarray(pts2d, float).reshape(-1, 2)
    w = np.ones(len(x)) if weights is None else np.asarray(weights, float).ravel()
    m = w > 0
    x, w = x[m], w[m]
    if len(x) < 3:
        raise InsufficientPoints("circle fit needs three weighted points")
    sw = w.sum()
    mu = (w[:, None] * x).sum(0) / sw
    sq = (x * x).sum(1)
    a = 2 * (x - mu)
    y = sq - (w * sq).sum() / sw
    lhs = a.T @ (w[:, None] * a)
    rhs = a.T @ (w * y)
    ev = np.linalg.eigvalsh(lhs)
    if ev[0] <= 1e-12 * max(ev[1], 1e-300):
        raise SingularSystem("collinear points do not determine a circle")
    try:
        center = cho_solve(cho_factor(lhs), rhs)
    except np.linalg.LinAlgError:
        raise SingularSystem("normal equations not positive definite") from None
    r2 = float((w * ((x - center) ** 2).sum(1)).sum() / sw)
    return center, math.sqrt(r2)


def _arc_extent(angles, gap_deg):
    a = np.sort(np.mod(angles, TWO_PI))
    gaps = np.diff(np.concatenate([a, [a[0] + TWO_PI]]))
    g = int(np.argmax(gaps))
    start = a[(g + 1) % len(a)]
    if gaps[g] <= math.radians(gap_deg):
        return start, TWO_PI
    return start, TWO_PI - gaps[g]


def fit_circle(pts, gap_deg: float = ARC_GAP_DEG) -> FitResult:
    """Plane fit, rotation into the plane, 2D circle fit, and back to 3D.

    The arc spans the input angles unless the largest angular gap is below
    ``gap_deg``, which yields a full circle. ``residual`` is the RMS radial
    distance; ``extras["out_of_plane_rms"]`` reports the plane misfit.
    """
    x, w = _as_weighted(pts).active()
    normal, _ = fit_plane(WeightedPoints(x, w))
    mean = (w[:, None] * x).sum(0) / w.sum()
    xy, frame = rodrigues_to_plane(x - mean, normal)
    c2, r = fit_circle2d(xy, w)
    center = mean + frame.inverse(np.array([c2[0], c2[1], 0.0]))
    ang = np.arctan2(xy[:, 1] - c2[1], xy[:, 0] - c2[0])
    start, sweep = _arc_extent(ang, gap_deg)
    start_dir = frame.inverse(np.array([math.cos(start), math.sin(start), 0.0]))
    # angles grow counter-clockwise about the fitted normal, hence rotation_dir -1
    arc = CircularArc.from_frame(center, normal, r, start_dir, sweep, rotation_dir=-1)
    radial = dist_circle_paper(x, arc)
    res = math.sqrt(float((w * radial ** 2).sum() / w.sum()))
    oop = math.sqrt(float((w * ((x - center) @ arc.plane_normal) ** 2).sum() / w.sum()))
    return FitResult(arc, res, extras={"out_of_plane_rms": oop})


# ---------------------------------------------------------------- point order

def _mst(x):
    n = len(x)
    k = min(n - 1, 24)
    d, j = cKDTree(x).query(x, k + 1)
    rows = np.repeat(np.arange(n), k)
    eps = 1e-12 * max(float(np.ptp(x, axis=0).max()), 1e-300)
    g = coo_matrix((d[:, 1:].ravel() + eps, (rows, j[:, 1:].ravel())), shape=(n, n)).tocsr()
    g = g.maximum(g.T)
    if connected_components(g, directed=False)[0] > 1:
        full = np.linalg.norm(x[:, None] - x[None], axis=-1) + eps
        np.fill_diagonal(full, 0.0)
        g = full
    t = minimum_spanning_tree(g)
    return (t + t.T).tocsr()


def _tree_far(tree, src):
    order, pred = breadth_first_order(tree, src, directed=False, return_predecessors=True)
    dist = np.zeros(tree.shape[0])
    for v in order[1:]:
        dist[v] = dist[pred[v]] + tree[pred[v], v]
    far = int(order[np.argmax(dist[order])])
    return far, pred


def order_points_mst(pts) -> np.ndarray:
    """Order points along the longest path of their Euclidean minimum spanning tree.

    The path is found by a double breadth-first traversal of the tree; points
    off the path are inserted next to their nearest path vertex.
    """
    x = np.asarray(pts, float).reshape(-1, 3)
    n = len(x)
    if n <= 2:
        return np.arange(n)
    tree = _mst(x)
    a, _ = _tree_far(tree, 0)
    b, pred = _tree_far(tree, a)
    path = [b]
    while path[-1] != a:
        path.append(int(pred[path[-1]]))
    path = np.array(path[::-1])
    key = np.full(n, -1.0)
    key[path] = np.arange(len(path), dtype=float)
    off = np.setdiff1d(np.arange(n), path)
    if len(off):
        _, near = cKDTree(x[path]).query(x[off])
        lo = np.maximum(near - 1, 0)
        hi = np.minimum(near + 1, len(path) - 1)
        tangent = x[path[hi]] - x[path[lo]]
        tn = np.linalg.norm(tangent, axis=1, keepdims=True)
        tangent = tangent / np.where(tn > 0, tn, 1)
        proj = ((x[off] - x[path[near]]) * tangent).sum(1)
        span = np.linalg.norm(x[path[hi]] - x[path[lo]], axis=1)
        frac = np.clip(proj / np.where(span > 0, span, 1), -0.49, 0.49)
        key[off] = near + frac
    return np.lexsort((np.arange(n), key))


# --------------------------------------------------------------------- spline

def chord_length_params(q, exponent: float = 1.0) -> np.ndarray:
    """Normalized cumulative chord lengths raised to ``exponent``.

    ``exponent`` 1 is chord length, 0.5 centripetal and 0 uniform spacing.
    """
    d = np.linalg.norm(np.diff(q, axis=0), axis=1)
    if not d.sum() > 0:
        raise DegenerateInput("all points coincide")
    d = d ** exponent
    total = d.sum()
    if not total > 0:
        raise DegenerateInput("all points coincide")
    u = np.concatenate([[0.0], np.cumsum(d) / total])
    u[-1] = 1.0
    return u


def averaging_knots(u, n_ctrl: int, degree: int) -> np.ndarray:
    """Knot vector for least-squares approximation by parameter averaging."""
    m = len(u) - 1
    n = n_ctrl - 1
    p = degree
    d = (m + 1) / (n - p + 1)
    inner = []
    for j in range(1, n - p + 1):
        i = int(j * d)
        alpha = j * d - i
        inner.append((1 - alpha) * u[i - 1] + alpha * u[i])
    kn = np.concatenate([np.zeros(p + 1), inner, np.ones(p + 1)])
    # keep interior knots strictly inside and non-decreasing
    kn[p + 1:-p - 1] = np.clip(np.maximum.accumulate(kn[p + 1:-p - 1]), 1e-12, 1 - 1e-12)
    return kn


def _lsq_control_points(q, w, u, knots, n_ctrl, degree):
    """Least-squares control points with the end points interpolated."""
    nmat = basis_matrix(knots, degree, n_ctrl, u)
    p0, pn = q[0], q[-1]
    inner = slice(1, len(q) - 1)
    r = q[inner] - np.outer(nmat[inner, 0], p0) - np.outer(nmat[inner, -1], pn)
    a = nmat[inner, 1:-1]
    wi = w[inner]
    lhs = a.T @ (wi[:, None] * a)
    rhs = a.T @ (wi[:, None] * r)
    try:
        mid = cho_solve(cho_factor(lhs), rhs)
    except np.linalg.LinAlgError:
        mid = np.linalg.lstsq(np.sqrt(wi)[:, None] * a, np.sqrt(wi)[:, None] * r, rcond=None)[0]
    return np.vstack([p0, mid, pn])


def _bspline_derivative(c: BSplineCurve):
    p = c.degree
    kn = c.knots
    cp = c.control_points
    den = (kn[p + 1:p + len(cp)] - kn[1:len(cp)])[:, None]
    q = p * np.diff(cp, axis=0) / np.where(den > 0, den, 1.0)
    return q, kn[1:-1], p - 1


def _eval_derivative(c: BSplineCurve, t):
    q, kn, p = _bspline_derivative(c)
    if p == 0:
        idx = np.clip(np.searchsorted(kn, t, side="right") - 1, 0, len(q) - 1)
        return q[idx]
    nmat = basis_matrix(kn, p, len(q), t)
    return nmat @ q


def _reproject(c, q, u, steps=3):
    """Gauss-Newton parameter correction; endpoints stay at 0 and 1."""
    t = u.copy()
    for _ in range(steps):
        diff = eval_bspline(c, t) - q
        d1 = _eval_derivative(c, t)
        g = (d1 * diff).sum(1)
        h = (d1 * d1).sum(1)
        t = np.clip(t - np.divide(g, h, out=np.zeros_like(g), where=h > 0), 0.0, 1.0)
    t[0], t[-1] = 0.0, 1.0
    return np.maximum.accumulate(t)


def _basis_rows(kn_rows, p, t):
    """Cox-de Boor values where every evaluation has its own knot vector."""
    r, ln = kn_rows.shape
    n = ln - p - 1
    span = np.clip((kn_rows <= t[:, None]).sum(1) - 1, p, n - 1)
    vals = np.zeros((r, p + 1))
    vals[:, 0] = 1.0
    left = np.zeros((r, p + 1))
    right = np.zeros((r, p + 1))
    rows = np.arange(r)
    for j in range(1, p + 1):
        left[:, j] = t - kn_rows[rows, span + 1 - j]
        right[:, j] = kn_rows[rows, span + j] - t
        saved = np.zeros(r)
        for k in range(j):
            den = right[:, k + 1] + left[:, j - k]
            tmp = np.divide(vals[:, k], den, out=np.zeros(r), where=den != 0)
            vals[:, k] = saved + right[:, k + 1] * tmp
            saved = left[:, j - k] * tmp
        vals[:, j] = saved
    return span, vals


def _knot_jacobian(ja, col0, cp, t, kn, p, sw, q, h=1e-7):
    """Central-difference derivatives of the weighted residuals w.r.t. the
    interior knots, written into ``ja[:, :, col0 + j]``. Only points inside
    a knot's support are evaluated, all knots in one batch."""
    n_in = len(kn) - 2 * (p + 1)
    kk = p + 1 + np.arange(n_in)
    lo = kn[np.maximum(kk - p - 1, 0)]
    hi = kn[np.minimum(kk + p + 1, len(kn) - 1)]
    jj, ii = np.nonzero((t[None, :] >= lo[:, None]) & (t[None, :] <= hi[:, None]))
    if not len(jj):
        return
    up = np.minimum(kn[kk] + h, 1.0)
    dn = np.maximum(kn[kk] - h, 0.0)
    rows = np.tile(kn, (2 * len(jj), 1))
    r = np.arange(len(jj))
    rows[r, kk[jj]] = up[jj]
    rows[len(jj) + r, kk[jj]] = dn[jj]
    span, vals = _basis_rows(rows, p, np.concatenate([t[ii], t[ii]]))
    pos = np.einsum("rk,rkd->rd", vals, cp[span[:, None] - p + np.arange(p + 1)])
    diff = (pos[:len(jj)] - pos[len(jj):]) / (up - dn)[jj, None]
    ja[ii, :, col0 + jj] = sw[ii, None] * diff


def _refine_joint(q, w, c, u, free_knots=True, max_iter=200):
    """Joint Levenberg-Marquardt over interior control points, point
    parameters and (optionally) interior knots.

    Each parameter only moves its own point, so the parameters are
    eliminated through a Schur complement and every iteration solves a
    system the size of the control-point and knot unknowns. End control
    points and end parameters stay fixed, so the data end points remain
    interpolated. Knot derivatives are central differences.
    """
    m, n, p = len(q), len(c.control_points), c.degree
    if m <= 2 or n <= 2:
        return c, u
    n_in = n - p - 1 if free_knots else 0
    sw = np.sqrt(w)
    ncp = 3 * (n - 2)
    na = ncp + n_in
    cp = c.control_points.copy()
    kn = c.knots.copy()
    t = u.copy()
    inner = np.arange(1, m - 1)
    scale = max(float(np.ptp(q, axis=0).max()), 1e-300)

    def residual(cp_, t_, kn_):
        return sw[:, None] * (basis_matrix(kn_, p, n, t_) @ cp_ - q)

    def cost(r):
        return float((r * r).sum())

    r = residual(cp, t, kn)
    f = cost(r)
    lam = 1e-3
    for _ in range(max_iter):
        if f <= (1e-13 * scale) ** 2 * m:
            break
        bm = basis_matrix(kn, p, n, t)
        ja = np.zeros((m, 3, na))
        for d in range(3):
            ja[:, d, d:ncp:3] = sw[:, None] * bm[:, 1:-1]
        if n_in:
            _knot_jacobian(ja, ncp, cp, t, kn, p, sw, q)
        db = _eval_derivative(BSplineCurve(p, cp, kn), t) * sw[:, None]
        db[0] = db[-1] = 0.0
        a_flat = ja.reshape(3 * m, na)
        ata = a_flat.T @ a_flat
        atb = np.einsum("kdi,kd->ki", ja, db)          # (m, na)
        btb = (db * db).sum(1)
        ga = a_flat.T @ r.ravel()
        gb = (db * r).sum(1)
        improved = False
        for _ in range(12):
            bb = btb * (1 + lam) + 1e-300
            bb[[0, -1]] = np.inf
            sa = ata + lam * np.diag(np.diag(ata)) - (atb / bb[:, None]).T @ atb
            rhs = -(ga - atb.T @ (gb / bb))
            try:
                da = np.linalg.solve(sa, rhs)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            dt = -(gb + atb @ da) / bb
            cp_new = cp.copy()
            cp_new[1:-1] += da[:ncp].reshape(-1, 3)
            t_new = np.clip(t + dt, 0.0, 1.0)
            t_new[0], t_new[-1] = 0.0, 1.0
            kn_new = kn.copy()
            if n_in:
                kn_new[p + 1:p + 1 + n_in] = np.sort(np.clip(kn[p + 1:p + 1 + n_in] + da[ncp:], 1e-9, 1 - 1e-9))
            r_new = residual(cp_new, t_new, kn_new)
            f_new = cost(r_new)
            if f_new < f:
                rel = (f - f_new) / max(f, 1e-300)
                cp, t, kn, r, f = cp_new, t_new, kn_new, r_new, f_new
                lam = max(lam / 3, 1e-12)
                improved = True
                break
            lam *= 10
        if not improved or rel < STALL_TOL:
            break
    try:
        out = BSplineCurve(p, cp, kn)
    except InvalidParam:
        return c, u
    return out, np.maximum.accumulate(t)


def _point_curve_dist(c, q):
    p, _ = closest_point_bspline(q, c, samples=max(256, 4 * len(q)))
    return np.linalg.norm(q - p, axis=1)


def chamfer_points_curve(q, c, n_samples: int | None = None) -> float:
    """Symmetric mean nearest distance between points and curve samples."""
    m = n_samples or int(np.clip(4 * len(q), 256, 4096))
    s = eval_bspline(c, np.linspace(*c.bounds, m))
    d_pc = _point_curve_dist(c, q)
    d_cp, _ = cKDTree(q).query(s)
    return 0.5 * (float(d_pc.mean()) + float(d_cp.mean()))


def _fit_bspline_start(q, w, n_ctrl, degree, corrections, exponent, free_knots, max_iter):
    u = chord_length_params(q, exponent)
    knots = averaging_knots(u, n_ctrl, degree)
    cp = _lsq_control_points(q, w, u, knots, n_ctrl, degree)
    c = BSplineCurve(degree, cp, knots)
    for _ in range(corrections):
        u = _reproject(c, q, u)
        cp = _lsq_control_points(q, w, u, knots, n_ctrl, degree)
        c = BSplineCurve(degree, cp, knots)
    return _refine_joint(q, w, c, u, free_knots, max_iter=max_iter)


def _fit_bspline_ordered(q, w, n_ctrl, degree, corrections, free_knots=True):
    """Fixed-size fit from chord-length, centripetal and uniform parameters.

    Each start gets a short refinement budget; the first one that
    interpolates is returned, otherwise the lowest-cost start is refined
    further.
    """
    budget = 200 if n_ctrl <= FREE_KNOT_LIMIT else 60
    triage = min(TRIAGE_ITER, budget)
    scale = max(float(np.ptp(q, axis=0).max()), 1e-300)
    best = None
    for exponent in PARAM_EXPONENTS:
        c, u = _fit_bspline_start(q, w, n_ctrl, degree, corrections, exponent, free_knots, triage)
        r = eval_bspline(c, u) - q
        cost = float((w * (r * r).sum(1)).sum() / w.sum())
        if best is None or cost < best[2]:
            best = (c, u, cost)
        if cost <= (EXACT_TOL * scale) ** 2:
            return c
    c, _ = _refine_joint(q, w, best[0], best[1], free_knots, max_iter=budget - triage)
    return c


def fit_bspline(pts, tolerance: float = SPLINE_TOLERANCE, degree: int = 3,
                max_ctrl: int = MAX_CONTROL_POINTS, ordering=None, corrections: int = 2,
                max_points: int = 256) -> FitResult:
    """Least-squares b-spline approximation with control-point doubling.

    Points are ordered along their minimum spanning tree, parameterized by
    chord length and fitted with an averaging knot vector and interpolated
    end points. The number of control points starts at ``degree + 1`` and
    doubles until the point/curve Chamfer distance drops below ``tolerance``
    or ``max_ctrl`` is reached (``extras["converged"]`` is then False).
    Once the tolerance is met, counts between the last two rounds are
    bisected for the smallest one still within it.
    Each round refines control points, point parameters and interior knots
    jointly; at most ``max_points`` evenly spaced ordered points enter the
    solve, while residuals use all of them.

    ``residual`` is the weighted RMS point-to-curve distance. A round that
    would increase it is discarded: ``extras["history"]`` lists each tried
    count with its Chamfer distance and the best residual so far, which
    never increases.
    """
    wp = _as_weighted(pts)
    x, w = wp.active()
    if len(x) < degree + 1:
        raise InsufficientPoints(f"spline fit needs at least {degree + 1} points")
    order = order_points_mst(x) if ordering is None else np.asarray(ordering)
    q_all, w_all = x[order], w[order]
    chord_length_params(q_all)
    keep = np.unique(np.linspace(0, len(q_all) - 1, min(len(q_all), max_points)).round().astype(int))
    q, wq = q_all[keep], w_all[keep]
    n_ctrl = degree + 1
    limit = min(max_ctrl, len(q))
    scale = max(float(np.ptp(q, axis=0).max()), 1e-300)
    history = []
    best = None

    def attempt(count):
        nonlocal best
        c = _fit_bspline_ordered(q, wq, count, degree, corrections)
        d = _point_curve_dist(c, q_all)
        res = math.sqrt(float((w_all * d * d).sum() / w_all.sum()))
        cd = chamfer_points_curve(q_all, c)
        if best is None or res <= best[2]:
            best = (c, cd, res)
        history.append({"n_ctrl": count, "chamfer": cd, "residual": best[2]})
        return cd < tolerance, res <= 1e-12 * scale

    prev = n_ctrl
    while True:
        reached, exact = attempt(n_ctrl)
        if reached or exact or n_ctrl >= limit:
            break
        prev, n_ctrl = n_ctrl, min(2 * n_ctrl, limit)
    # bisect towards the smallest count within tolerance; joint refinement
    # of an over-parameterized spline can stall where a smaller one is exact
    lo, hi = prev, n_ctrl
    while reached and not exact and hi - lo > 1:
        mid = (lo + hi) // 2
        within, exact = attempt(mid)
        lo, hi = (lo, mid) if within else (mid, hi)
    c, cd, res = best
    # map ordering back to the caller's index space
    full_order = np.flatnonzero(wp.weights > 0)[order]
    return FitResult(c, res, full_order, {"chamfer": cd, "history": history,
                                          "converged": bool(cd < tolerance or res <= 1e-12 * scale)})


# ------------------------------------------------------------ type selection

@dataclass(frozen=True)
class FitConfig:
    accept_threshold: float = ACCEPT_THRESHOLD
    spline_tolerance: float = SPLINE_TOLERANCE
    max_ctrl: int = MAX_CONTROL_POINTS
    degree: int = 3
    arc_gap_deg: float = ARC_GAP_DEG


def _selection_residual(fit: FitResult) -> float:
    oop = fit.extras.get("out_of_plane_rms", 0.0)
    return math.hypot(fit.residual, oop)


def classify_and_fit(pts, config: FitConfig = FitConfig()) -> FitResult:
    """Fit every applicable primitive and keep the simplest acceptable one.

    Types are tried in the order line, circle, b-spline; the first whose
    residual is within ``accept_threshold`` wins, otherwise the lowest
    residual is taken. Circle residuals include the out-of-plane misfit.
    ``extras["residuals"]`` lists every attempted type.
    """
    wp = _as_weighted(pts)
    fits = {}
    attempts = [
        (PrimitiveType.LINE, lambda: fit_line(wp)),
        (PrimitiveType.CIRCLE, lambda: fit_circle(wp, config.arc_gap_deg)),
        (PrimitiveType.BSPLINE, lambda: fit_bspline(wp, config.spline_tolerance, config.degree,
                                                    config.max_ctrl)),
    ]
    chosen = None
    for kind, fn in attempts:
        try:
            fits[kind] = fn()
        except (DegenerateInput, InvalidParam):
            continue
        if _selection_residual(fits[kind]) <= config.accept_threshold:
            chosen = kind
            break
    if not fits:
        raise DegenerateInput("no primitive could be fitted")
    if chosen is None:
        chosen = min(fits, key=lambda k: (_selection_residual(fits[k]), int(k)))
    best = fits[chosen]
    extras = dict(best.extras)
    extras["residuals"] = {k.label: _selection_residual(f) for k, f in fits.items()}
    return FitResult(best.curve, best.residual, best.ordering, extras)
