"""Time the compiled and pure-Python sample-elimination kernels on identical input.

Usage: python benchmarks/bench_kernels.py [--candidates 50000] [--keep 10000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from sharpedges import _kernels
from sharpedges.sampling import elimination_radius, neighbor_graph


def make_input(m: int, n: int, seed: int):
    rng = np.random.default_rng(seed)
    pts = np.c_[rng.random((m, 2)), np.zeros(m)]
    r = elimination_radius(1.0, n)
    indptr, indices, contrib = neighbor_graph(pts, r, n, m)
    return indptr, indices, contrib, rng.normal(size=m)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--candidates", type=int, default=50_000)
    ap.add_argument("--keep", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    data = make_input(args.candidates, args.keep, args.seed)
    results = {}
    for name, fn in sorted(_kernels.available_backends().items()):
        best = np.inf
        for _ in range(args.repeat):
            t = time.perf_counter()
            order = fn(*data, args.keep)
            best = min(best, time.perf_counter() - t)
        results[name] = (best, order)
        print(f"{name:<8}{best * 1e3:10.1f} ms")
    if len(results) == 2:
        same = np.array_equal(results["python"][1], results["cython"][1])
        print(f"speedup  {results['python'][0] / results['cython'][0]:.1f}x, identical output: {same}")
    print(f"default backend: {_kernels.BACKEND}")


if __name__ == "__main__":
    main()
