import json

import numpy as np
import pytest

from sharpedges.curves import BSplineCurve, CircularArc, LineSegment, PrimitiveType, dist_curve, edges_to_json
from sharpedges.errors import InvalidParam
from sharpedges.mesh import bbox_diagonal, boundary_vertices
from sharpedges.synthetic import (KINDS, default_params, gen_primitive_solid, normalize_model, random_params,
                                  smooth_edges)


def test_unit_box():
    m = gen_primitive_solid("box")
    assert len(m.edges) == 12
    assert all(isinstance(c, LineSegment) for c in m.edges)
    np.testing.assert_allclose([c.length for c in m.edges], 1.0, atol=1e-12)
    corners = {tuple(np.round(p, 9) + 0.0) for c in m.edges for p in (c.x_start, c.x_end)}
    assert corners == {(x, y, z) for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)}


def test_cylinder():
    m = gen_primitive_solid("cylinder", {"radius": 0.5, "height": 1.0})
    assert len(m.edges) == 2
    assert all(isinstance(c, CircularArc) and c.is_full_circle for c in m.edges)
    np.testing.assert_allclose([c.radius for c in m.edges], 0.5)
    centers = sorted(tuple(np.round(c.center, 12) + 0.0) for c in m.edges)
    assert centers == [(0.0, 0.0, 0.0), (0.0, 0.0, 1.0)]


def test_lofted_profile_uses_generator_control_points():
    p = default_params("lofted_spline_profile", seed=3)
    m = gen_primitive_solid("lofted_spline_profile", p, seed=3)
    splines = [c for c in m.edges if isinstance(c, BSplineCurve)]
    assert len(splines) == 2
    cps = np.asarray(p["control_points"])
    for s in splines:
        np.testing.assert_array_equal(s.control_points[:, :2], cps)


def test_fillet_box_mixed():
    kinds = {c.kind for c in gen_primitive_solid("fillet_box").edges}
    assert kinds == {PrimitiveType.LINE, PrimitiveType.CIRCLE}


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("resolution", [8, 32])
def test_edges_on_mesh_and_watertight(kind, resolution):
    m = gen_primitive_solid(kind, resolution=resolution)
    assert not boundary_vertices(m.mesh.faces, m.mesh.n_vertices).any()
    on = m.mesh.vertices[m.edge_vertices]
    for c in m.edges:
        d = dist_curve(on, c)
        # the edge is covered by marked vertices at its ends and along its length
        assert d.min() <= 1e-6
        assert (d <= 1e-6).sum() >= 2
    # edge vertices sit on an edge
    best = np.min([dist_curve(on, c) for c in m.edges], axis=0)
    assert best.max() <= 1e-6


@pytest.mark.parametrize("kind", KINDS)
def test_generator_deterministic(kind):
    a = gen_primitive_solid(kind, random_params(kind, 5), seed=5)
    b = gen_primitive_solid(kind, random_params(kind, 5), seed=5)
    assert np.array_equal(a.mesh.vertices, b.mesh.vertices)
    assert edges_to_json(a.edges) == edges_to_json(b.edges)
    assert json.dumps(a.recipe, sort_keys=True) == json.dumps(b.recipe, sort_keys=True)


def test_random_rotation_is_applied():
    p = random_params("box", 1)
    rot = np.asarray(p["rotation"])
    np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-9)
    m = gen_primitive_solid("box", p)
    on = m.mesh.vertices[m.edge_vertices]
    assert np.min([dist_curve(on, c) for c in m.edges], axis=0).max() <= 1e-6


def test_invalid_params():
    with pytest.raises(InvalidParam):
        gen_primitive_solid("torus")
    with pytest.raises(InvalidParam):
        gen_primitive_solid("box", resolution=1)
    with pytest.raises(InvalidParam):
        gen_primitive_solid("box", {"rotation": [[2, 0, 0], [0, 1, 0], [0, 0, 1]]})
    with pytest.raises(InvalidParam):
        smooth_edges(gen_primitive_solid("box"), -1)


def test_smoothing_examples():
    m = gen_primitive_solid("box")
    assert smooth_edges(m, 0) is m
    s = smooth_edges(m, 5, 0.5)
    assert s.mesh.n_vertices == m.mesh.n_vertices
    assert np.array_equal(s.mesh.faces, m.mesh.faces)
    assert edges_to_json(s.edges) == edges_to_json(m.edges)
    v = s.mesh.vertices[m.edge_vertices]
    d = np.min([dist_curve(v, c) for c in m.edges], axis=0)
    assert 0 < d.max() < 0.1
    assert s.recipe["smoothing"] == {"rounds": 5, "lambda": 0.5}


def test_normalize_model_keeps_edges_on_mesh():
    m = normalize_model(gen_primitive_solid("fillet_box"))
    assert np.linalg.norm(m.mesh.vertices, axis=1).max() <= 1.0 + 1e-12
    assert bbox_diagonal(m.mesh) == pytest.approx(2.0)
    on = m.mesh.vertices[m.edge_vertices]
    assert np.min([dist_curve(on, c) for c in m.edges], axis=0).max() <= 1e-6
    assert "normalization" in m.recipe
