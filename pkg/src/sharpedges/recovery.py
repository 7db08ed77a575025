"""Sharp-edge recovery: snap mesh vertices onto predicted parametric edges."""

from __future__ import annotations

import numpy as np

from .decomposition import nearest_edges
from .errors import InvalidParam
from .mesh import TriMesh, bbox_diagonal

RECOVER_FACTOR = 1.5


def recovery_radius(mesh_or_points, tau_fraction: float = 0.005, factor: float = RECOVER_FACTOR) -> float:
    """``factor * tau`` with ``tau = tau_fraction * bbox diagonal``."""
    return float(factor * tau_fraction * bbox_diagonal(mesh_or_points))


def recover_edges(mesh: TriMesh, edges, radius: float):
    """Move every vertex within ``radius`` of an edge onto its nearest edge point.

    Connectivity is unchanged and normals are recomputed. Returns the new
    mesh and a boolean mask of moved vertices.
    """
    if not radius >= 0:
        raise InvalidParam("radius must be non-negative")
    if not edges:
        return mesh, np.zeros(mesh.n_vertices, bool)
    _, dist, near = nearest_edges(mesh.vertices, edges)
    moved = dist <= radius
    v = np.array(mesh.vertices)
    v[moved] = near[moved]
    return mesh.with_vertices(v), moved
