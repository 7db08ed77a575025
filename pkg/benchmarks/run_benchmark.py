"""Run the synthetic end-to-end benchmark and compare it with the committed reference.

Usage: python benchmarks/run_benchmark.py [--count 30] [--out result.json] [--update-reference]
"""

import argparse
import json
import sys
import time
from pathlib import Path

from sharpedges.pipeline import PipelineConfig, run_benchmark, summarize_benchmark

REFERENCE = Path(__file__).with_name("reference_benchmark.json")
# absolute slack before a metric counts as a regression
SLACK = {"precision": 0.02, "recall": 0.02, "iou": 0.02, "siou": 0.02, "ecd": 0.002}


def benchmark_document(count: int, seed: int = 0) -> dict:
    cfg = PipelineConfig()
    runs = run_benchmark(count, cfg, seed)
    doc = summarize_benchmark(runs)
    doc["models"] = {r.model_id: {"ground_truth": r.ground_truth.to_dict(),
                                  "detection": r.detection.to_dict()} for r in runs}
    for m in doc["models"].values():
        for rep in m.values():
            rep.pop("matches")
    doc["seed"] = seed
    return doc


def regressions(doc: dict, ref: dict) -> list:
    out = []
    for mode in ("ground_truth", "detection"):
        for k, slack in SLACK.items():
            new, old = doc[mode][k], ref[mode][k]
            worse = new > old + slack if k == "ecd" else new < old - slack
            if worse:
                out.append(f"{mode}.{k}: {new:.5f} vs reference {old:.5f}")
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    ap.add_argument("--update-reference", action="store_true")
    args = ap.parse_args(argv)
    t = time.perf_counter()
    doc = benchmark_document(args.count, args.seed)
    elapsed = time.perf_counter() - t
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    for mode in ("ground_truth", "detection"):
        vals = " ".join(f"{k} {doc[mode][k]:.5f}" for k in SLACK)
        print(f"{mode:<13}{vals}")
    print(f"{args.count} models in {elapsed:.1f} s")
    if args.update_reference:
        REFERENCE.write_text(text)
        print(f"reference written to {REFERENCE}")
        return 0
    if REFERENCE.is_file() and args.count == json.loads(REFERENCE.read_text())["count"]:
        bad = regressions(doc, json.loads(REFERENCE.read_text()))
        for line in bad:
            print(f"REGRESSION {line}")
        return 1 if bad else 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
