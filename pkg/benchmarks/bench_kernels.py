"""Timing of the compiled connectivity kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from coxperc import kernels


def cases(rng):
    # Palm-style pattern: origin first, roughly critical density at r = 1
    n = 4000
    pts = np.vstack([np.zeros((1, 2)), rng.uniform(-30, 30, (n, 2))])
    marks = rng.random(len(pts))
    edges = rng.integers(0, 20000, (30000, 2))
    return {
        "gilbert_labels (n=4000, r=1)": lambda impl: kernels.gilbert_labels(pts, 1.0, impl),
        "origin_reach (n=4000, r=1)": lambda impl: kernels.origin_reach(pts, 1.0, 28.0, impl),
        "escape_threshold (n=4000, r=1)": lambda impl: kernels.escape_threshold(pts, marks, 1.0, 28.0, impl),
        "edge_labels (20000 vertices, 30000 edges)": lambda impl: kernels.edge_labels(20000, edges, impl),
    }


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    impls = {"python": kernels.backend("python")}
    try:
        impls["cython"] = kernels.backend("cython")
    except ImportError:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':45s} " + " ".join(f"{k:>12s}" for k in impls) + "     speedup")
    for name, fn in cases(rng).items():
        times = {}
        for label, impl in impls.items():
            fn(impl)  # warm-up
            times[label] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        cols = " ".join(f"{times[k] * 1e3:10.2f}ms" for k in impls)
        speed = f"{times['python'] / times['cython']:9.1f}x" if "cython" in times else ""
        print(f"{name:45s} {cols} {speed}")


if __name__ == "__main__":
    main()
