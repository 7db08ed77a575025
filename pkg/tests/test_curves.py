import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sharpedges.curves import (BSplineCurve, CircularArc, LineSegment, PrimitiveType, closest_point,
                               curve_from_dict, curve_to_dict, dist_arc_exact, dist_circle_paper, dist_curve,
                               dist_line, edges_from_json, edges_to_json, eval_arc, eval_bspline, eval_curve,
                               eval_line, reverse_curve, sample_curve, transform_curve)
from sharpedges.errors import InvalidParam, OutOfRange, ParseError

UNIT = CircularArc.from_frame((0, 0, 0), (0, 0, 1), 1.0, (1, 0, 0), 2 * math.pi)
SEG = LineSegment((0, 0, 0), (2, 0, 0))
vec = st.tuples(*[st.floats(-5, 5)] * 3).map(np.array)


def random_curves(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=3), rng.normal(size=3)
    n = rng.normal(size=3)
    d = rng.normal(size=3)
    arc = CircularArc.from_frame(rng.normal(size=3), n, rng.uniform(0.2, 3), d, rng.uniform(0.3, 6.2),
                                 rng.choice([-1, 1]))
    spl = BSplineCurve.clamped_uniform(rng.normal(size=(int(rng.integers(4, 12)), 3)))
    return [LineSegment(a, a + b + 0.1), arc, spl]


def test_line_examples():
    np.testing.assert_allclose(eval_line(SEG, 1.0), (1, 0, 0))
    np.testing.assert_array_equal(eval_line(SEG, 0.0), SEG.x_start)
    np.testing.assert_array_equal(eval_line(SEG, 2.0), SEG.x_end)
    diag = LineSegment((0, 0, 0), (1, 1, 1))
    np.testing.assert_allclose(eval_line(diag, math.sqrt(3) / 2), (0.5, 0.5, 0.5), atol=1e-15)
    with pytest.raises(OutOfRange):
        eval_line(SEG, 2.5)
    with pytest.raises(InvalidParam):
        LineSegment((1, 1, 1), (1, 1, 1))


def test_arc_examples():
    quarter = eval_arc(UNIT, math.pi / 2)
    # v = u x n = (1,0,0) x (0,0,1) = (0,-1,0)
    np.testing.assert_allclose(quarter, (0, -1, 0), atol=1e-15)
    flipped = CircularArc.from_frame((0, 0, 0), (0, 0, 1), 1.0, (1, 0, 0), 2 * math.pi, -1)
    np.testing.assert_allclose(eval_arc(flipped, math.pi / 2), (0, 1, 0), atol=1e-15)
    np.testing.assert_allclose(eval_arc(UNIT, 0.0), (1, 0, 0))
    np.testing.assert_allclose(eval_arc(UNIT, 2 * math.pi), UNIT.x_start, atol=1e-9)
    with pytest.raises(OutOfRange):
        eval_arc(CircularArc.from_frame((0, 0, 0), (0, 0, 1), 1, (1, 0, 0), 1.0), 1.5)


def test_arc_invariants_enforced():
    with pytest.raises(InvalidParam):
        CircularArc((0, 0, 0), (1, 0, 0), (0, 2, 0), 1.0, 1, (0, 0, 1))
    with pytest.raises(InvalidParam):
        CircularArc((0, 0, 0), (1, 0, 0), (0, 1, 0), 1.0, 0, (0, 0, 1))
    with pytest.raises(InvalidParam):
        CircularArc((0, 0, 0), (1, 0, 0), (0, 1, 0), -1.0, 1, (0, 0, 1))


def test_arc_sweep_from_endpoints():
    a = CircularArc((0, 0, 0), (1, 0, 0), (0, -1, 0), 1.0, 1, (0, 0, 1))
    assert a.sweep == pytest.approx(math.pi / 2)
    b = CircularArc((0, 0, 0), (1, 0, 0), (0, -1, 0), 1.0, -1, (0, 0, 1))
    assert b.sweep == pytest.approx(3 * math.pi / 2)


def test_bspline_examples():
    lin = BSplineCurve(1, [(0, 0, 0), (1, 0, 0)], [0, 0, 1, 1])
    np.testing.assert_allclose(eval_bspline(lin, 0.5), (0.5, 0, 0))
    cp = np.random.default_rng(0).normal(size=(6, 3))
    c = BSplineCurve.clamped_uniform(cp)
    np.testing.assert_allclose(eval_bspline(c, 0.0), cp[0], atol=1e-15)
    np.testing.assert_allclose(eval_bspline(c, 1.0), cp[-1], atol=1e-15)
    straight = BSplineCurve.clamped_uniform(np.outer(np.arange(7.0), (1, 2, 3)))
    p = eval_bspline(straight, np.linspace(0, 1, 50))
    assert np.linalg.norm(np.cross(p, (1, 2, 3)), axis=1).max() < 1e-12
    with pytest.raises(OutOfRange):
        eval_bspline(c, 1.1)


def test_bspline_invariants_enforced():
    with pytest.raises(InvalidParam):
        BSplineCurve(3, np.zeros((3, 3)), np.zeros(7))
    with pytest.raises(InvalidParam):
        BSplineCurve(3, np.zeros((4, 3)), [0, 0, 0, 1, 1, 1, 1, 1])
    with pytest.raises(InvalidParam):
        BSplineCurve(3, np.zeros((4, 3)), [0, 0, 0, 0, 1, 1, 1, 0.5])
    with pytest.raises(InvalidParam):
        BSplineCurve(2, np.zeros((6, 3)), [0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1])


def test_bspline_partition_of_unity():
    kn = [0, 0, 0, 0, 0.2, 0.7, 0.7, 1, 1, 1, 1]
    ones = BSplineCurve(3, np.tile([1.0, 1.0, 1.0], (7, 1)), kn)
    np.testing.assert_allclose(eval_bspline(ones, np.linspace(0, 1, 101)), 1.0, atol=1e-14)


def test_distance_examples():
    assert dist_line((0, 1, 0), SEG) == 1.0
    assert dist_line((3, 0, 0), SEG) == 1.0
    assert dist_line((1.3, 0, 0), SEG) == 0.0
    assert dist_circle_paper((2, 0, 0), UNIT) == 1.0
    assert dist_circle_paper((0, 0, 1), UNIT) == 0.0
    assert dist_circle_paper((0, 1, 0), UNIT) == pytest.approx(0, abs=1e-15)
    assert dist_arc_exact((2, 0, 0), UNIT) == pytest.approx(1.0)
    assert dist_arc_exact((0.6, 0.8, 0), UNIT) == pytest.approx(0, abs=1e-15)


def test_exact_arc_distance_off_plane_against_dense_oracle():
    # every point of the unit circle is sqrt(1 + 1) away from (0, 0, 1)
    t = np.linspace(0, 2 * math.pi, 100_001)
    oracle = np.linalg.norm(np.c_[np.cos(t), np.sin(t), np.zeros_like(t)] - (0, 0, 1), axis=1).min()
    assert oracle == pytest.approx(math.sqrt(2), abs=1e-12)
    assert dist_arc_exact((0, 0, 1), UNIT) == pytest.approx(oracle, abs=1e-12)


def test_bounded_arc_distance_clamps_to_endpoint():
    half = CircularArc.from_frame((0, 0, 0), (0, 0, 1), 1.0, (1, 0, 0), math.pi)
    # sweep covers y <= 0; (0, 2, 0) is nearest to the endpoints
    assert dist_arc_exact((0, 2, 0), half) == pytest.approx(math.sqrt(5))
    assert dist_arc_exact((0, -2, 0), half) == pytest.approx(1.0)


def test_sample_curve_examples():
    np.testing.assert_allclose(sample_curve(LineSegment((0, 0, 0), (1, 0, 0)), 3),
                               [(0, 0, 0), (0.5, 0, 0), (1, 0, 0)])
    q = CircularArc.from_frame((0, 0, 0), (0, 0, 1), 1, (1, 0, 0), math.pi / 2)
    np.testing.assert_allclose(sample_curve(q, 2), [q.x_start, q.x_end], atol=1e-15)
    np.testing.assert_allclose(sample_curve(UNIT, 4), [(1, 0, 0), (0, -1, 0), (-1, 0, 0), (0, 1, 0)],
                               atol=1e-15)
    with pytest.raises(InvalidParam):
        sample_curve(SEG, 1)


@given(st.integers(0, 100_000))
def test_samples_lie_on_curve(seed):
    for c in random_curves(seed):
        pts = sample_curve(c, 25)
        assert dist_curve(pts, c).max() < 1e-9


@given(st.integers(0, 100_000), st.floats(0, 6))
def test_rho_reflects_across_u_axis(seed, t):
    rng = np.random.default_rng(seed)
    n, d, c = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
    a = CircularArc.from_frame(c, n, 1.3, d, 2 * math.pi, 1)
    b = CircularArc.from_frame(c, n, 1.3, d, 2 * math.pi, -1)
    pa, pb = eval_arc(a, t) - a.center, eval_arc(b, t) - b.center
    uh = a.u / a.radius
    np.testing.assert_allclose(pa @ uh, pb @ uh, atol=1e-9)
    np.testing.assert_allclose(pa - (pa @ uh) * uh, -(pb - (pb @ uh) * uh), atol=1e-9)


@given(st.integers(0, 100_000))
def test_bspline_similarity_invariance(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    s, shift = rng.uniform(0.1, 5), rng.normal(size=3)
    c = random_curves(seed)[2]
    t = np.linspace(0, 1, 17)

    def fn(x):
        return s * np.asarray(x) @ q.T + shift

    np.testing.assert_allclose(eval_bspline(transform_curve(c, fn, s), t), fn(eval_bspline(c, t)), atol=1e-9)


@given(vec)
def test_radial_circle_distance_equals_sphere_distance(x):
    assert dist_circle_paper(x, UNIT) == abs(np.linalg.norm(x - UNIT.center, axis=-1) - 1.0)


@given(st.integers(0, 100_000), vec)
def test_closest_point_not_beaten_by_dense_samples(seed, x):
    for c in random_curves(seed):
        d = float(dist_curve(x, c))
        dense = np.linalg.norm(sample_curve(c, 4000) - x, axis=1).min()
        assert d <= dense + 1e-9


@given(st.integers(0, 100_000))
def test_transform_and_reverse(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))

    def fn(x):
        return 2.0 * np.asarray(x) @ q.T + 1.0

    for c in random_curves(seed):
        pts = sample_curve(c, 20)
        assert dist_curve(fn(pts), transform_curve(c, fn, 2.0)).max() < 1e-9
        r = reverse_curve(c)
        assert dist_curve(pts, r).max() < 1e-9
        lo, hi = r.bounds
        np.testing.assert_allclose(eval_curve(r, lo), eval_curve(c, c.bounds[1]), atol=1e-9)


def test_closest_point_batch_shapes():
    for c in random_curves(1):
        q, t = closest_point(np.zeros((5, 3)), c)
        assert q.shape == (5, 3) and np.shape(t) == (5,)
        q1, _ = closest_point(np.zeros(3), c)
        assert q1.shape == (3,)


def test_json_roundtrip_exact():
    edges = random_curves(7) + [UNIT]
    text = edges_to_json(edges)
    back = edges_from_json(text)
    assert edges_to_json(back) == text
    for a, b in zip(edges, back):
        assert a.kind == b.kind
        np.testing.assert_array_equal(sample_curve(a, 9), sample_curve(b, 9))
    assert json.loads(text)["edges"][-1]["full"] is True


def test_json_errors():
    with pytest.raises(ParseError):
        edges_from_json("not json")
    with pytest.raises(ParseError):
        curve_from_dict({"type": "ellipse"})
    with pytest.raises(ParseError):
        curve_from_dict({"type": "line", "start": [0, 0, 0]})
    with pytest.raises(ParseError):
        curve_from_dict({"type": "line", "start": [0, 0, 0], "end": [0, 0, 0]})


def test_primitive_labels():
    assert [t.label for t in PrimitiveType] == ["line", "circle", "bspline"]
    assert PrimitiveType.from_label("circle") is PrimitiveType.CIRCLE
    assert curve_to_dict(SEG)["type"] == "line"
