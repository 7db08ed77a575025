import numpy as np
import pytest
from scipy.spatial import cKDTree

from conftest import icosphere
from sharpedges.errors import DegenerateMesh, ParseError
from sharpedges.meshio import (load_mesh, ply_bytes, read_ply, weld, write_mesh_obj, write_mesh_ply,
                               write_mesh_stl)
from sharpedges.mesh import estimate_curvatures


def test_obj_single_triangle(tmp_path):
    p = tmp_path / "t.obj"
    p.write_text("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (3, 1)
    np.testing.assert_allclose(m.vertex_normals, [[0, 0, 1]] * 3)


def test_obj_quad_fan_and_negative_indices(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n")
    assert load_mesh(p).n_faces == 2


@pytest.mark.parametrize("suffix", [".obj", ".ply", ".stl"])
def test_empty_file(tmp_path, suffix):
    p = tmp_path / f"e{suffix}"
    p.write_bytes(b"")
    with pytest.raises(ParseError):
        load_mesh(p)


def test_malformed_obj(tmp_path):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0 x\n")
    with pytest.raises(ParseError):
        load_mesh(p)
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
    with pytest.raises(ParseError):
        load_mesh(p)


def test_obj_all_degenerate(tmp_path):
    p = tmp_path / "d.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
    with pytest.raises(DegenerateMesh):
        load_mesh(p)


def test_unknown_format(tmp_path):
    p = tmp_path / "m.xyz"
    p.write_text("1 2 3")
    with pytest.raises(ParseError):
        load_mesh(p)


def test_icosphere_ply_roundtrip(tmp_path):
    m = icosphere(3)
    p = tmp_path / "s.ply"
    write_mesh_ply(p, m)
    back = load_mesh(p)
    assert (back.n_vertices, back.n_faces) == (642, 1280)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.faces, m.faces)


def test_ply_ascii_and_channels(tmp_path):
    m = estimate_curvatures(icosphere(1))
    props = {"x": m.vertices[:, 0], "y": m.vertices[:, 1], "z": m.vertices[:, 2],
             "label": np.arange(m.n_vertices, dtype=np.int32)}
    p = tmp_path / "a.ply"
    p.write_bytes(ply_bytes(props, m.faces, ascii_format=True))
    back = load_mesh(p)
    np.testing.assert_allclose(back.vertices, m.vertices, rtol=0, atol=0)
    vx = read_ply(p)["elements"]["vertex"]
    np.testing.assert_array_equal(vx["label"], np.arange(m.n_vertices))
    q = tmp_path / "c.ply"
    write_mesh_ply(q, m, {"extra": np.ones(m.n_vertices)})
    vx = read_ply(q)["elements"]["vertex"]
    np.testing.assert_array_equal(vx["kappa1"], m.curvature.kappa1)
    assert "extra" in vx


def test_truncated_ply(tmp_path):
    m = icosphere(1)
    p = tmp_path / "t.ply"
    write_mesh_ply(p, m)
    data = p.read_bytes()
    p.write_bytes(data[: len(data) // 2])
    with pytest.raises(ParseError):
        load_mesh(p)


def test_stl_roundtrip_welds(tmp_path):
    m = icosphere(2)
    p = tmp_path / "s.stl"
    write_mesh_stl(p, m)
    back = load_mesh(p)
    assert (back.n_vertices, back.n_faces) == (m.n_vertices, m.n_faces)
    d, _ = cKDTree(m.vertices).query(back.vertices)
    assert d.max() < 1e-6
    assert back.face_areas().sum() == pytest.approx(m.face_areas().sum(), rel=1e-6)


def test_ascii_stl(tmp_path):
    p = tmp_path / "a.stl"
    p.write_text("solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\n"
                 "vertex 0 1 0\nendloop\nendfacet\nfacet normal 0 0 1\nouter loop\n"
                 "vertex 1 0 0\nvertex 1 1 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n")
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (4, 2)


def test_obj_writer_roundtrip(tmp_path):
    m = icosphere(1)
    p = tmp_path / "s.obj"
    write_mesh_obj(p, m)
    back = load_mesh(p)
    np.testing.assert_allclose(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.faces, m.faces)


def test_weld_tolerance():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1e-9, 0, 0], [1, 1e-9, 0], [1, 1, 0]])
    f = np.array([[0, 1, 2], [4, 5, 3]])
    vw, fw = weld(v, f)
    assert len(vw) == 4
    np.testing.assert_array_equal(fw, [[0, 1, 2], [1, 3, 0]])
