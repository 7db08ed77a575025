import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import least_squares

from sharpedges.curves import (BSplineCurve, CircularArc, PrimitiveType, dist_circle_paper, dist_curve,
                               eval_bspline, eval_curve, sample_curve)
from sharpedges.errors import DegenerateInput, InsufficientPoints, SingularSystem
from sharpedges.fitting import (FitConfig, WeightedPoints, averaging_knots, chamfer_points_curve,
                                chord_length_params, classify_and_fit, fit_bspline, fit_circle, fit_circle2d,
                                fit_line, fit_plane, order_points_mst, rodrigues_to_plane)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    return q if np.linalg.det(q) > 0 else -q


def angle_between(a, b):
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.degrees(math.acos(min(1.0, c)))


# ------------------------------------------------------------------------ line

def test_line_exact():
    f = fit_line(np.array([(0, 0, 0), (1, 0, 0), (2, 0, 0.0)]))
    np.testing.assert_allclose(f.curve.direction, (1, 0, 0))
    np.testing.assert_allclose(f.curve.x_start, (0, 0, 0), atol=1e-15)
    np.testing.assert_allclose(f.curve.x_end, (2, 0, 0), atol=1e-15)
    assert f.residual == 0.0


def test_line_zero_weight_outlier():
    pts = np.array([(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 5, 0.0)])
    f = fit_line(WeightedPoints(pts, [1, 1, 1, 0]))
    np.testing.assert_allclose(f.curve.direction, (1, 0, 0))
    assert f.residual == 0.0


def test_line_noisy_against_pca_oracle():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=3), rng.normal(size=3)
    t = rng.random(100)
    pts = a + np.outer(t, b - a) + rng.normal(0, 0.01, (100, 3))
    f = fit_line(pts)
    assert angle_between(f.curve.direction, b - a) < 1.0
    assert 0.005 <= f.residual <= 0.02
    evals, evecs = np.linalg.eigh(np.cov(pts.T))
    assert angle_between(f.curve.direction, evecs[:, -1]) < 1e-9


def test_line_errors():
    with pytest.raises(InsufficientPoints):
        fit_line(np.zeros((1, 3)))
    with pytest.raises(DegenerateInput):
        fit_line(np.ones((5, 3)))


def test_line_ambiguous_flag():
    pts = np.array([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0.0)])
    assert fit_line(pts).extras["ambiguous"]


def test_line_sign_convention():
    pts = np.array([(0, 0, 0), (-1, -1, 0), (-2, -2, 0.0)])
    d = fit_line(pts).curve.direction
    assert d[0] > 0


@given(st.integers(0, 100_000))
def test_line_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(30, 3)) * (3, 0.2, 0.1)
    rot, shift = random_rotation(rng), rng.normal(size=3)
    a, b = fit_line(pts), fit_line(pts @ rot.T + shift)
    assert abs(a.residual - b.residual) < 1e-9
    assert angle_between(a.curve.direction @ rot.T, b.curve.direction) < 1e-6


@given(st.integers(0, 100_000), st.floats(0.01, 100))
def test_weight_scaling_invariance(seed, s):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(40, 3))
    w = rng.random(40) + 0.1
    for fn in (fit_line, fit_circle):
        a, b = fn(WeightedPoints(pts, w)), fn(WeightedPoints(pts, w * s))
        np.testing.assert_allclose(sample_curve(a.curve, 7), sample_curve(b.curve, 7), atol=1e-9)


@given(st.integers(0, 100_000))
def test_zero_weight_points_ignored(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(25, 3))
    junk = rng.normal(size=(10, 3)) * 50
    w = np.r_[np.ones(25), np.zeros(10)]
    for fn in (fit_line, fit_circle):
        a = fn(pts)
        b = fn(WeightedPoints(np.vstack([pts, junk]), w))
        np.testing.assert_allclose(sample_curve(a.curve, 7), sample_curve(b.curve, 7), atol=1e-12)
        assert abs(a.residual - b.residual) < 1e-12


# ----------------------------------------------------------------------- plane

def test_plane_examples():
    rng = np.random.default_rng(1)
    xy = rng.random((20, 2))
    n, off = fit_plane(np.c_[xy, np.zeros(20)])
    np.testing.assert_allclose(np.abs(n), (0, 0, 1), atol=1e-12)
    assert off == pytest.approx(0, abs=1e-12)
    p = np.c_[xy, 1 - xy.sum(1)]
    n, off = fit_plane(p)
    np.testing.assert_allclose(np.abs(n), np.ones(3) / math.sqrt(3), atol=1e-12)
    with pytest.raises(DegenerateInput):
        fit_plane(np.outer(np.arange(5.0), (1, 2, 3)))


def test_plane_noisy():
    rng = np.random.default_rng(2)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    basis = np.linalg.svd(normal[None])[2][1:]
    pts = rng.normal(size=(200, 2)) @ basis + rng.normal(0, 0.01, (200, 1)) * normal
    n, _ = fit_plane(pts)
    assert angle_between(n, normal) < 1.0
    evals, evecs = np.linalg.eigh(np.cov(pts.T))
    assert angle_between(n, evecs[:, 0]) < 1e-6


# -------------------------------------------------------------------- rotation

def test_rodrigues_examples():
    pts = np.random.default_rng(3).normal(size=(10, 3))
    xy, frame = rodrigues_to_plane(pts, (0, 0, 1))
    np.testing.assert_array_equal(xy, pts[:, :2])
    _, frame = rodrigues_to_plane(pts, (1, 0, 0))
    # oracle: explicit rotation matrix about -y by 90 degrees
    r = np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0.0]])
    np.testing.assert_allclose(frame.apply(np.array([1.0, 0, 0])), (0, 0, 1), atol=1e-15)
    np.testing.assert_allclose(frame.matrix(), r, atol=1e-15)
    _, flip = rodrigues_to_plane(pts, (0, 0, -1))
    np.testing.assert_allclose(flip.apply(np.array([0, 0, -1.0])), (0, 0, 1), atol=1e-15)


@given(st.integers(0, 100_000))
def test_rodrigues_roundtrip(seed):
    rng = np.random.default_rng(seed)
    pts, n = rng.normal(size=(10, 3)), rng.normal(size=3)
    _, frame = rodrigues_to_plane(pts, n)
    np.testing.assert_allclose(frame.inverse(frame.apply(pts)), pts, atol=1e-12)
    np.testing.assert_allclose(frame.apply(n / np.linalg.norm(n)), (0, 0, 1), atol=1e-12)


# ---------------------------------------------------------------------- circle

def geometric_circle_oracle(xy):
    def res(p):
        return np.hypot(xy[:, 0] - p[0], xy[:, 1] - p[1]) - p[2]

    return least_squares(res, [xy[:, 0].mean(), xy[:, 1].mean(), 1.0], method="lm").x


def test_circle2d_examples():
    c, r = fit_circle2d([(1, 0), (-1, 0), (0, 1), (0, -1)])
    np.testing.assert_allclose(c, 0, atol=1e-15)
    assert r == pytest.approx(1.0)
    c, r = fit_circle2d([(1, 0), (0, 1), (-1, 0)])
    np.testing.assert_allclose(c, 0, atol=1e-15)
    assert r == pytest.approx(1.0)
    with pytest.raises(SingularSystem):
        fit_circle2d([(0, 0), (1, 1), (2, 2), (3, 3)])


def test_circle2d_noisy_against_lm_oracle():
    rng = np.random.default_rng(4)
    t = rng.uniform(0, 2 * math.pi, 50)
    xy = np.c_[np.cos(t), np.sin(t)] + rng.normal(0, 0.005, (50, 2))
    c, r = fit_circle2d(xy)
    assert np.linalg.norm(c) < 0.01 and abs(r - 1) < 0.01
    oracle = geometric_circle_oracle(xy)
    assert np.linalg.norm(c - oracle[:2]) < 0.005 and abs(r - oracle[2]) < 0.005


@given(st.integers(0, 100_000), st.integers(3, 30))
def test_circle2d_exact(seed, n):
    rng = np.random.default_rng(seed)
    c0, r0 = rng.normal(size=2), rng.uniform(0.1, 10)
    t = np.sort(rng.uniform(0, 2 * math.pi, n))
    if np.diff(np.r_[t, t[0] + 2 * math.pi]).min() < 1e-2:
        return
    c, r = fit_circle2d(c0 + r0 * np.c_[np.cos(t), np.sin(t)])
    np.testing.assert_allclose(c, c0, atol=1e-9 * max(1, r0))
    assert abs(r - r0) < 1e-9 * max(1, r0)


def test_circle3d_exact_recovery():
    t = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    center = np.array([1.0, 2, 3])
    pts = center + 2 * np.c_[np.cos(t), np.zeros(16), np.sin(t)]
    f = fit_circle(pts)
    a = f.curve
    np.testing.assert_allclose(a.center, center, atol=1e-7)
    assert a.radius == pytest.approx(2, abs=1e-7)
    np.testing.assert_allclose(np.abs(a.plane_normal), (0, 1, 0), atol=1e-7)
    assert a.is_full_circle and f.residual < 1e-9


def test_semicircle_is_arc_with_extreme_endpoints():
    t = np.linspace(0, math.pi, 40)
    pts = np.c_[np.cos(t), np.sin(t), np.zeros(40)]
    a = fit_circle(pts).curve
    assert not a.is_full_circle
    assert a.sweep == pytest.approx(math.pi, abs=1e-9)
    ends = {tuple(np.round(a.x_start, 9)), tuple(np.round(a.x_end, 9))}
    assert ends == {(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)}
    assert dist_curve(pts, a).max() < 1e-9


def test_circle_collinear_raises():
    with pytest.raises(DegenerateInput):
        fit_circle(np.outer(np.arange(6.0), (1, 1, 0)))


def test_circle_residual_recomputable():
    rng = np.random.default_rng(5)
    t = rng.uniform(0, 2 * math.pi, 80)
    pts = np.c_[np.cos(t), np.sin(t), np.zeros(80)] + rng.normal(0, 0.01, (80, 3))
    f = fit_circle(pts)
    assert f.residual == pytest.approx(math.sqrt(np.mean(dist_circle_paper(pts, f.curve) ** 2)), abs=1e-9)


# -------------------------------------------------------------------- ordering

def test_mst_order_line():
    x = np.array([(i, 0, 0) for i in range(4)], float)
    perm = np.random.default_rng(0).permutation(4)
    order = order_points_mst(x[perm])
    xs = x[perm][order, 0]
    assert list(xs) in ([0, 1, 2, 3], [3, 2, 1, 0])
    assert sorted(order_points_mst(x[:2])) == [0, 1]


def test_mst_order_c_arc():
    rng = np.random.default_rng(6)
    t = np.sort(rng.uniform(0, 1.5 * math.pi, 120))
    pts = np.c_[np.cos(t), np.sin(t), np.zeros(120)]
    perm = rng.permutation(120)
    o = order_points_mst(pts[perm])
    ang = t[perm][o]
    assert np.all(np.diff(ang) > 0) or np.all(np.diff(ang) < 0)


@given(st.integers(0, 100_000), st.integers(2, 80))
def test_mst_order_is_permutation(seed, n):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    assert np.array_equal(np.sort(order_points_mst(pts)), np.arange(n))


# ---------------------------------------------------------------------- spline

def test_chord_params_and_knots():
    q = np.array([(0, 0, 0), (1, 0, 0), (3, 0, 0.0)])
    np.testing.assert_allclose(chord_length_params(q), [0, 1 / 3, 1])
    q = np.array([(0, 0, 0), (1, 0, 0), (1, 4, 0.0)])
    np.testing.assert_allclose(chord_length_params(q, 0.5), [0, 1 / 3, 1])
    np.testing.assert_allclose(chord_length_params(q, 0.0), [0, 0.5, 1])
    u = np.linspace(0, 1, 11)
    kn = averaging_knots(u, 6, 3)
    assert len(kn) == 10 and np.all(np.diff(kn) >= 0)
    np.testing.assert_array_equal(kn[:4], 0)
    np.testing.assert_array_equal(kn[-4:], 1)


def test_spline_exact_cubic_recovery():
    cp = np.array([(0, 0, 0), (1, 2, 0), (3, -1, 1), (4, 1, 0.5)])
    c0 = BSplineCurve.clamped_uniform(cp)
    pts = eval_bspline(c0, np.linspace(0, 1, 60))
    f = fit_bspline(pts)
    assert len(f.extras["history"]) == 1
    got = f.curve.control_points
    # traversal direction is arbitrary
    if np.linalg.norm(got[0] - cp[0]) > np.linalg.norm(got[0] - cp[-1]):
        got = got[::-1]
    np.testing.assert_allclose(got, cp, atol=1e-6)
    assert f.residual < 1e-6


def test_spline_collinear_input():
    pts = np.outer(np.linspace(0, 1, 30), (1, 2, 3))
    c = fit_bspline(pts).curve
    assert np.linalg.norm(np.cross(c.control_points, (1, 2, 3)), axis=1).max() < 1e-6 * math.sqrt(14)


def test_spline_helix_quarter_turn():
    t = np.linspace(0, math.pi / 2, 200)
    pts = np.c_[np.cos(t), np.sin(t), 0.3 * t]
    f = fit_bspline(pts)
    assert f.residual < 0.01 and len(f.curve.control_points) <= 16
    # independent dense Chamfer oracle
    dense = eval_bspline(f.curve, np.linspace(0, 1, 20_000))
    d1 = np.linalg.norm(pts[:, None] - dense[None], axis=-1).min(1).mean()
    d2 = np.linalg.norm(dense[::20, None] - pts[None], axis=-1).min(1).mean()
    assert 0.5 * (d1 + d2) < 0.01
    assert abs(chamfer_points_curve(pts, f.curve) - 0.5 * (d1 + d2)) < 1e-3


def test_spline_history_non_increasing():
    rng = np.random.default_rng(7)
    t = np.linspace(0, 4 * math.pi, 300)
    pts = np.c_[t, np.sin(t), np.cos(2 * t) * 0.5] + rng.normal(0, 1e-3, (300, 3))
    f = fit_bspline(pts, tolerance=1e-4)
    res = [h["residual"] for h in f.extras["history"]]
    assert len(res) > 1 and all(b <= a for a, b in zip(res, res[1:]))
    assert sorted(f.ordering) == list(range(300))


def test_spline_bisects_between_doubling_rounds():
    rng = np.random.default_rng(7)
    t = np.linspace(0, 4 * math.pi, 300)
    pts = np.c_[t, np.sin(t), np.cos(2 * t) * 0.5] + rng.normal(0, 1e-3, (300, 3))
    f = fit_bspline(pts)
    counts = [h["n_ctrl"] for h in f.extras["history"]]
    assert counts[:3] == [4, 8, 16]
    # remaining counts narrow the (8, 16] bracket
    assert len(counts) > 3 and all(8 < n < 16 for n in counts[3:])
    res = [h["residual"] for h in f.extras["history"]]
    assert all(b <= a for a, b in zip(res, res[1:]))
    assert f.residual == res[-1]


def test_spline_insufficient_points():
    with pytest.raises(InsufficientPoints):
        fit_bspline(np.random.default_rng(0).normal(size=(3, 3)))


# ------------------------------------------------------------------- selection

def test_classify_line_circle_spline():
    t = np.linspace(0, 1, 50)
    assert classify_and_fit(np.outer(t, (1, 1, 0))).kind is PrimitiveType.LINE
    a = np.linspace(0, 2 * math.pi, 50, endpoint=False)
    assert classify_and_fit(np.c_[np.cos(a), np.sin(a), np.zeros(50)]).kind is PrimitiveType.CIRCLE
    s = np.linspace(-1, 1, 200)
    f = classify_and_fit(np.c_[s, 0.3 * np.sin(math.pi * s), np.zeros(200)])
    assert f.kind is PrimitiveType.BSPLINE
    r = f.extras["residuals"]
    assert r["line"] > 0.01 and r["circle"] > 0.01 and r["bspline"] <= 0.01


def test_classify_respects_threshold():
    rng = np.random.default_rng(8)
    t = np.linspace(0, 1, 100)
    pts = np.outer(t, (1, 0, 0)) + rng.normal(0, 0.02, (100, 3))
    assert classify_and_fit(pts, FitConfig(accept_threshold=0.1)).kind is PrimitiveType.LINE


def test_fit_result_json():
    f = fit_line(np.outer(np.arange(3.0), (1, 0, 0)))
    d = f.to_dict()
    assert d["type"] == "line" and d["residual"] == 0.0
    assert dist_curve(eval_curve(f.curve, 1.0), f.curve) == 0.0
