"""Recover parametric sharp edges (lines, circular arcs, b-splines) from smoothed triangle meshes."""

__version__ = "0.1.0"

from .curves import (BSplineCurve, CircularArc, LineSegment, PrimitiveType, closest_point, dist_curve,
                     edges_from_json, edges_to_json, eval_curve, sample_curve)
from .decomposition import (PointAnnotations, SegmentSet, annotate_ground_truth, cluster_segments,
                            consolidate, detect_sharp_points, estimate_offsets)
from .errors import (DegenerateInput, DegenerateMesh, InvalidParam, MissingChannel, MissingCurvature,
                     ParseError, SharpEdgesError, ShapeMismatch)
from .fitting import FitConfig, FitResult, classify_and_fit, fit_bspline, fit_circle, fit_line
from .losses import LossWeights
from .mesh import TriMesh, estimate_curvatures, make_mesh
from .meshio import load_mesh, write_mesh_ply
from .metrics import EvalReport, edge_chamfer_distance, evaluate, siou
from .pipeline import PipelineConfig, run_benchmark
from .recovery import recover_edges
from .sampling import PointCloud, read_cloud_ply, sample_adaptive, sample_uniform, write_cloud_ply
from .synthetic import gen_primitive_solid, normalize_model, smooth_edges

__all__ = [
    "BSplineCurve", "CircularArc", "LineSegment", "PrimitiveType", "closest_point", "dist_curve",
    "edges_from_json", "edges_to_json", "eval_curve", "sample_curve",
    "PointAnnotations", "SegmentSet", "annotate_ground_truth", "cluster_segments", "consolidate",
    "detect_sharp_points", "estimate_offsets",
    "DegenerateInput", "DegenerateMesh", "InvalidParam", "MissingChannel", "MissingCurvature",
    "ParseError", "SharpEdgesError", "ShapeMismatch",
    "FitConfig", "FitResult", "classify_and_fit", "fit_bspline", "fit_circle", "fit_line",
    "LossWeights", "TriMesh", "estimate_curvatures", "make_mesh", "load_mesh", "write_mesh_ply",
    "EvalReport", "edge_chamfer_distance", "evaluate", "siou", "PipelineConfig", "run_benchmark",
    "recover_edges", "PointCloud", "read_cloud_ply", "sample_adaptive", "sample_uniform",
    "write_cloud_ply", "gen_primitive_solid", "normalize_model", "smooth_edges",
]
