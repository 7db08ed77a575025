"""Shared mesh builders and hypothesis settings."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sharpedges.mesh import make_mesh

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def icosphere(subdivisions: int, radius: float = 1.0):
    """Subdivided icosahedron; ``10 * 4**s + 2`` vertices, ``20 * 4**s`` faces."""
    t = (1 + 5 ** 0.5) / 2
    v = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t), (0, -1, -t),
         (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
         (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(p, float) / np.linalg.norm(p) for p in v]
    faces = list(f)
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return make_mesh(np.array(verts) * radius, np.array(faces))


def grid_plane(n: int = 21, size: float = 1.0):
    xs = np.linspace(0, size, n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    v = np.c_[gx.ravel(), gy.ravel(), np.zeros(n * n)]
    f = []
    for i in range(n - 1):
        for j in range(n - 1):
            a, b, c, d = i * n + j, (i + 1) * n + j, (i + 1) * n + j + 1, i * n + j + 1
            f += [(a, b, c), (a, c, d)]
    return make_mesh(v, np.array(f))


def open_cylinder(radius: float = 0.5, height: float = 1.0, n_around: int = 64, n_up: int = 33):
    th = np.linspace(0, 2 * np.pi, n_around, endpoint=False)
    zs = np.linspace(0, height, n_up)
    v = np.array([(radius * np.cos(a), radius * np.sin(a), z) for z in zs for a in th])
    f = []
    for i in range(n_up - 1):
        for j in range(n_around):
            a = i * n_around + j
            b = i * n_around + (j + 1) % n_around
            c, d = a + n_around, b + n_around
            f += [(a, b, d), (a, d, c)]
    return make_mesh(v, np.array(f))


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(3)


@pytest.fixture(scope="session")
def smoothed_box():
    from sharpedges.synthetic import gen_primitive_solid, normalize_model, smooth_edges
    return normalize_model(smooth_edges(gen_primitive_solid("box"), 5, 0.5))


@pytest.fixture(scope="session")
def box_cloud(smoothed_box):
    from sharpedges.mesh import estimate_curvatures
    from sharpedges.sampling import sample_adaptive
    mesh = estimate_curvatures(smoothed_box.mesh)
    return sample_adaptive(mesh, 10_000, 1.5, seed=0)


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
