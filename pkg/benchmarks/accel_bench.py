"""Benchmark: compiled halving walk vs the pure-numpy fallback.

Runs the full compress recursion through each backend on the same inputs
and reports per-call timings.  Usage:

    python benchmarks/accel_bench.py [--n 4096] [--reps 20]
"""

import argparse
import math
import time

import numpy as np

from mfld import kernels, thinning
from mfld.accel import compiled, fallback
from mfld.kernels import Gaussian
from mfld.rng import BENCH, stream


def time_compress(backend, points, kern, reps):
    import mfld.accel as accel
    import mfld.thinning as thin

    saved = (accel.impl, accel.halve_walk, accel.halve_walk_batch)
    accel.impl = backend
    accel.halve_walk = backend.halve_walk
    accel.halve_walk_batch = backend.halve_walk_batch
    thin.accel = accel
    try:
        start = time.perf_counter()
        for rep in range(reps):
            thinning.compress(points, kern, 0, 0.5, stream(rep, BENCH))
        return (time.perf_counter() - start) / reps
    finally:
        accel.impl, accel.halve_walk, accel.halve_walk_batch = saved
        thin.accel = accel


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4096)
    parser.add_argument("--reps", type=int, default=20)
    args = parser.parse_args()

    kern = Gaussian(1.0)
    points = stream(0, BENCH, args.n).standard_normal((args.n, 2))
    py = time_compress(fallback, points, kern, args.reps)
    print(f"compress(n={args.n}) pure python : {py * 1e3:8.2f} ms/call")
    if compiled is None:
        print("compiled extension not built; install with `pip install -e .`")
        return
    cy = time_compress(compiled, points, kern, args.reps)
    print(f"compress(n={args.n}) compiled    : {cy * 1e3:8.2f} ms/call")
    print(f"speedup: {py / cy:.1f}x")


if __name__ == "__main__":
    main()
