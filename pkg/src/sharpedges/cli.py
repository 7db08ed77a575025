"""Command-line interface.

Verbs: synth, sample, annotate, detect-fit, recover, eval, losses.

Meshes and clouds are PLY; edge sets, configs and reports are JSON; batch
metrics are CSV. Each run writes its resolved configuration next to its
outputs (``<output>.config.json`` for file outputs, ``config.json`` inside
output directories). Exit codes: 0 success, 1 empty-result warnings under
``--strict``, 2 usage or I/O errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .curves import edges_from_json, edges_to_json
from .decomposition import PointAnnotations, annotate_ground_truth
from .errors import MissingChannel, ParseError, SharpEdgesError, ShapeMismatch
from .meshio import atomic_write_bytes, load_mesh, write_mesh_ply
from .metrics import evaluate, mean_report, reports_csv
from .pipeline import (BENCHMARK_KINDS, EmptyResultWarning, PipelineConfig, loss_report,
                       predict_from_annotations, predict_from_detection, sample_cloud)
from .recovery import recover_edges, recovery_radius
from .sampling import read_cloud_ply, write_cloud_ply
from .synthetic import KINDS, default_params, gen_primitive_solid, normalize_model, random_params, smooth_edges

EXIT_OK, EXIT_STRICT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid command-line arguments detected after parsing."""


# ------------------------------------------------------------------- helpers

def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def write_json(path, obj) -> None:
    atomic_write_bytes(path, dumps(obj).encode())


def write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from None


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".config.json")


def resolved_config(command: str, config: PipelineConfig, **extra) -> dict:
    doc = {"command": command, "config": config.to_dict(), "version": __version__}
    doc.update(extra)
    return doc


def build_config(args, **flags) -> PipelineConfig:
    """Defaults, then ``--config`` file, then ``--set`` pairs, then explicit flags."""
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    cfg = cfg.with_overrides(args.set)
    flags = {k: v for k, v in flags.items() if v is not None}
    return dataclasses.replace(cfg, **flags) if flags else cfg


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return p


def _load_edges(path):
    return edges_from_json(_require_file(path, "edge file").read_text())


def _load_cloud(path):
    return read_cloud_ply(_require_file(path, "point cloud"))


def _annotations(cloud, config, edges_path=None):
    """Annotation channels of ``cloud``, or fresh ones from an edge file."""
    tau = config.tau(cloud.positions)
    if edges_path is not None:
        return annotate_ground_truth(cloud, _load_edges(edges_path), config.tau_fraction)
    return PointAnnotations.from_channels(cloud.channels, tau)


# ------------------------------------------------------------------ commands

def _synth_one(task):
    i, kind, seed, random, cfg, normalize = task
    params = random_params(kind, seed) if random else default_params(kind, seed)
    model = gen_primitive_solid(kind, params, cfg.resolution, seed=seed)
    model = smooth_edges(model, cfg.smoothing_rounds, cfg.smoothing_lambda)
    if normalize:
        model = normalize_model(model)
    return f"{kind}_{i:03d}", model


def cmd_synth(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    cfg = build_config(args, seed=args.seed, smoothing_rounds=args.rounds, smoothing_lambda=args.lam,
                       resolution=args.resolution)
    kinds = BENCHMARK_KINDS if args.kind == "mix" else (args.kind,)
    tasks = [(i, kinds[i % len(kinds)], cfg.seed + i, args.random, cfg, not args.no_normalize)
             for i in range(args.count)]
    with ThreadPoolExecutor(max(1, args.jobs)) as ex:
        models = list(ex.map(_synth_one, tasks))
    out = Path(args.out)
    entries = []
    for mid, model in models:
        d = out / mid
        write_mesh_ply(d / "mesh.ply", model.mesh,
                       {"edge_vertex": np.asarray(model.edge_vertices, np.uint8)})
        write_text(d / "edges.json", edges_to_json(model.edges) + "\n")
        write_json(d / "recipe.json", model.recipe)
        entries.append({"id": mid, "dir": mid, "kind": model.recipe["kind"],
                        "seed": model.recipe["seed"], "n_edges": len(model.edges)})
    write_json(out / "manifest.json", {"models": entries, "count": len(entries)})
    write_json(out / "config.json", resolved_config("synth", cfg, kind=args.kind, random=args.random,
                                                    normalize=not args.no_normalize))
    print(f"wrote {len(entries)} models to {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.n is not None and args.n < 1:
        raise UsageError("--n must be >= 1")
    cfg = build_config(args, n_points=args.n, sampling=args.mode, gamma=args.gamma, seed=args.seed)
    mesh = load_mesh(_require_file(args.mesh, "mesh"))
    cloud = sample_cloud(mesh, cfg)
    write_cloud_ply(args.out, cloud)
    write_json(sidecar_path(args.out), resolved_config("sample", cfg, mesh=str(args.mesh),
                                                       n_points=len(cloud)))
    print(f"sampled {len(cloud)} points ({cfg.sampling})")
    return EXIT_OK


def cmd_annotate(args) -> int:
    cfg = build_config(args, tau_fraction=args.tau_fraction)
    cloud = _load_cloud(args.cloud)
    edges = _load_edges(args.edges)
    ann = annotate_ground_truth(cloud, edges, cfg.tau_fraction)
    write_cloud_ply(args.out, cloud.with_channels(**ann.channels()))
    n_edge = int(ann.edge_label.sum())
    write_json(sidecar_path(args.out), resolved_config(
        "annotate", cfg, cloud=str(args.cloud), edges=str(args.edges), tau=float(ann.tau),
        n_points=len(cloud), n_edge_points=n_edge))
    print(f"labeled {n_edge} of {len(cloud)} points as edge points (tau={ann.tau!r})")
    return EXIT_OK


def cmd_detect_fit(args) -> int:
    cfg = build_config(args)
    cloud = _load_cloud(args.cloud)
    if args.use_gt_labels:
        ann = _annotations(cloud, cfg, args.edges)
        pred = predict_from_annotations(cloud, ann, cfg)
    else:
        pred = predict_from_detection(cloud, cfg)
    doc = pred.to_json_dict()
    write_json(args.out, doc)
    if args.cloud_out:
        write_cloud_ply(args.cloud_out, cloud.with_channels(**pred.channels()))
    write_json(sidecar_path(args.out), resolved_config(
        "detect-fit", cfg, cloud=str(args.cloud), use_gt_labels=bool(args.use_gt_labels),
        edges=None if args.edges is None else str(args.edges)))
    kinds = [e["type"] for e in doc["edges"]]
    counts = ", ".join(f"{k} {kinds.count(k)}" for k in ("line", "circle", "bspline"))
    print(f"fitted {len(kinds)} edges ({counts}) from {len(pred.segments)} segments")
    return EXIT_OK


def cmd_recover(args) -> int:
    cfg = build_config(args)
    if args.radius is not None and not args.radius >= 0:
        raise UsageError("--radius must be non-negative")
    mesh = load_mesh(_require_file(args.mesh, "mesh"))
    edges = _load_edges(args.edges)
    radius = args.radius if args.radius is not None else recovery_radius(
        mesh, cfg.tau_fraction, cfg.recover_factor)
    out_mesh, moved = recover_edges(mesh, edges, radius)
    write_mesh_ply(args.out, out_mesh, {"moved": moved.astype(np.uint8)})
    n_moved = int(moved.sum())
    write_json(sidecar_path(args.out), resolved_config(
        "recover", cfg, mesh=str(args.mesh), edges=str(args.edges), radius=float(radius),
        moved=n_moved))
    print(f"moved {n_moved} vertices (radius={float(radius)!r})")
    return EXIT_OK


def _model_dirs(paths):
    dirs = []
    for p in map(Path, paths):
        man = p / "manifest.json"
        if man.is_file():
            dirs.extend(p / m["dir"] for m in read_json(man)["models"])
        elif p.is_dir():
            dirs.append(p)
        else:
            raise FileNotFoundError(f"model directory not found: {p}")
    return dirs


def _eval_one(task):
    d, args, cfg = task
    gt_edges = _load_edges(d / args.gt_name)
    pred_doc = read_json(_require_file(d / args.pred_name, "prediction"))
    cloud = _load_cloud(d / args.cloud_name)
    if int(pred_doc.get("n_points", -1)) != len(cloud):
        raise ShapeMismatch(f"{d}: prediction covers {pred_doc.get('n_points')} points, "
                            f"cloud has {len(cloud)}")
    try:
        ann = PointAnnotations.from_channels(cloud.channels, cfg.tau(cloud.positions))
    except MissingChannel:
        ann = annotate_ground_truth(cloud, gt_edges, cfg.tau_fraction)
    mask = np.zeros(len(cloud), bool)
    mask[np.asarray(pred_doc.get("mask", []), np.int64)] = True
    pred_edges = edges_from_json(json.dumps(pred_doc))
    return evaluate(d.name, mask, ann.edge_label, pred_doc.get("segments", []), ann.segments(),
                    pred_edges, gt_edges, cfg.ecd_samples, args.squared, cfg.empty_penalty)


def cmd_eval(args) -> int:
    cfg = build_config(args)
    dirs = _model_dirs(args.models)
    if not dirs:
        raise UsageError("no model directories given")
    ids = [d.name for d in dirs]
    if len(set(ids)) != len(ids):
        raise UsageError("model directory names must be unique")
    with ThreadPoolExecutor(max(1, args.jobs)) as ex:
        reports = list(ex.map(_eval_one, [(d, args, cfg) for d in dirs]))
    out = Path(args.out)
    for r in reports:
        write_json(out / f"{r.model_id}.json", r.to_dict())
    write_text(out / "metrics.csv", reports_csv(reports))
    write_json(out / "summary.json", mean_report(reports).to_dict())
    write_json(out / "config.json", resolved_config("eval", cfg, models=ids, squared=args.squared))
    m = mean_report(reports)
    print(f"{len(reports)} models: precision {m.precision:.4f} recall {m.recall:.4f} "
          f"iou {m.iou:.4f} siou {m.siou:.4f} ecd {m.ecd:.6f}")
    return EXIT_OK


def cmd_losses(args) -> int:
    cfg = build_config(args)
    cloud = _load_cloud(args.cloud)
    pred_doc = read_json(_require_file(args.pred, "prediction")) if args.pred else None
    gt_edges = _load_edges(args.edges) if args.edges else None
    if (pred_doc is None) != (gt_edges is None):
        raise UsageError("--pred and --edges must be given together")
    report = loss_report(cloud, cfg, pred_doc, gt_edges)
    for k in ("focal", "offset", "type", "embedding", "decomposition", "fitting", "total"):
        v = report[k]
        print(f"{k:<14}{'n/a' if v is None else repr(float(v))}")
    if args.out:
        write_json(args.out, report)
        write_json(sidecar_path(args.out), resolved_config("losses", cfg, cloud=str(args.cloud)))
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="JSON", help="pipeline config file (JSON object)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field; repeatable")
    common.add_argument("--strict", action="store_true",
                        help="exit with status 1 when a stage produces an empty result")

    p = argparse.ArgumentParser(prog="sharpedges", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("synth", parents=[common], help="generate synthetic models with exact edges",
                       description="Write DIR/<kind>_<i>/{mesh.ply,edges.json,recipe.json} plus "
                                   "DIR/manifest.json and DIR/config.json.")
    s.add_argument("--kind", default="mix", choices=KINDS + ("mix",))
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--random", action="store_true", help="randomize sizes and orientation")
    s.add_argument("--rounds", type=int, default=None, help="Laplacian smoothing rounds")
    s.add_argument("--lam", type=float, default=None, help="Laplacian smoothing factor")
    s.add_argument("--resolution", type=int, default=None)
    s.add_argument("--no-normalize", action="store_true", help="keep the generator frame")
    s.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sample", parents=[common], help="sample a point cloud from a mesh",
                       description="Mesh (PLY/OBJ/STL) in, PLY cloud with curvature channels out.")
    s.add_argument("mesh")
    s.add_argument("--out", required=True, metavar="CLOUD.ply")
    s.add_argument("--mode", choices=("uniform", "adaptive"), default=None)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("annotate", parents=[common], help="label a cloud against exact edges",
                       description="Adds label, offset_x/y/z, segment_id and prim_type channels.")
    s.add_argument("cloud")
    s.add_argument("--edges", required=True, metavar="EDGES.json")
    s.add_argument("--out", required=True, metavar="ANNOTATED.ply")
    s.add_argument("--tau-fraction", type=float, default=None)
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("detect-fit", parents=[common], help="detect, segment and fit edges",
                       description="Writes an EdgeSet JSON with residuals, segments and the "
                                   "predicted edge-point mask.")
    s.add_argument("cloud")
    s.add_argument("--out", required=True, metavar="PRED.json")
    s.add_argument("--use-gt-labels", action="store_true",
                   help="start from ground-truth annotations (fitting stage only)")
    s.add_argument("--edges", default=None, metavar="EDGES.json",
                   help="annotate on the fly when the cloud has no annotation channels")
    s.add_argument("--cloud-out", default=None, metavar="PRED_CLOUD.ply",
                   help="also write the cloud with prediction channels")
    s.set_defaults(func=cmd_detect_fit)

    s = sub.add_parser("recover", parents=[common], help="snap mesh vertices onto edges",
                       description="Vertices within the recovery radius of an edge move onto it.")
    s.add_argument("mesh")
    s.add_argument("--edges", required=True, metavar="EDGES.json")
    s.add_argument("--out", required=True, metavar="MESH.ply")
    s.add_argument("--radius", type=float, default=None,
                   help="absolute radius; default recover_factor * tau")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("eval", parents=[common], help="score predictions against ground truth",
                       description="Each MODEL_DIR holds the edge, prediction and cloud files; a "
                                   "directory with manifest.json expands to its models. Writes "
                                   "<id>.json, metrics.csv (with a mean row) and summary.json.")
    s.add_argument("models", nargs="+", metavar="MODEL_DIR")
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--gt-name", default="edges.json")
    s.add_argument("--pred-name", default="pred.json")
    s.add_argument("--cloud-name", default="annotated.ply")
    s.add_argument("--squared", action="store_true", help="squared-distance Chamfer variant")
    s.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("losses", parents=[common], help="evaluate every loss term",
                       description="Cloud must carry annotation and pred_* channels "
                                   "(see detect-fit --cloud-out).")
    s.add_argument("cloud")
    s.add_argument("--pred", default=None, metavar="PRED.json", help="needed for the fitting term")
    s.add_argument("--edges", default=None, metavar="EDGES.json", help="needed for the fitting term")
    s.add_argument("--out", default=None, metavar="REPORT.json")
    s.set_defaults(func=cmd_losses)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EmptyResultWarning)
        try:
            code = args.func(args)
        except UsageError as e:
            parser.print_usage(sys.stderr)
            print(f"sharpedges {args.command}: error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except (SharpEdgesError, OSError) as e:
            print(f"sharpedges {args.command}: error: {e}", file=sys.stderr)
            return EXIT_USAGE
    empty = False
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
        empty |= issubclass(w.category, EmptyResultWarning)
    if empty and args.strict:
        return EXIT_STRICT
    return code


if __name__ == "__main__":
    sys.exit(main())
