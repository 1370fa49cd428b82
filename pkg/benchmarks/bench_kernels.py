"""Timing comparison of the projection kernels across backends.

Runs the forward projector and the backprojector at desk scale
(512 px object, 805 half-turn angles, 725-column detector) under each
available backend and prints a small table.  Selection goes through
the same environment variable the library honors, so the numbers
reflect exactly what users get.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--size L]
"""

import argparse
import math
import os
import time

import numpy as np


def _time(fn, repeats):
    fn()  # warm-up; compiles the kernel on the jit backend
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--size", type=int, default=512)
    args = parser.parse_args()

    from tomotile._kernels import NUMBA_AVAILABLE
    from tomotile.grids import uniform_angles
    from tomotile.phantom import generate_phantom
    from tomotile.projector import detector_width_for, radon
    from tomotile.recon import fbp

    L = args.size
    ph = generate_phantom(L=L, seed=0)
    angles = uniform_angles(math.ceil(math.pi * L / 2), math.pi)
    det = detector_width_for((L, L))

    backends = ["numpy"] + (["numba"] if NUMBA_AVAILABLE else [])
    rows = []
    for backend in backends:
        os.environ["TOMOTILE_BACKEND"] = backend
        sino = radon(ph.grid, angles)
        forward = _time(lambda: radon(ph.grid, angles), args.repeats)
        back = _time(lambda: fbp(sino, L), args.repeats)
        rows.append((backend, forward, back))
    os.environ.pop("TOMOTILE_BACKEND", None)

    print("object %d px, %d angles, %d detector columns, best of %d"
          % (L, len(angles), det, args.repeats))
    print("%-8s %14s %14s" % ("backend", "forward [s]", "fbp [s]"))
    for backend, forward, back in rows:
        print("%-8s %14.3f %14.3f" % (backend, forward, back))
    if len(rows) == 2:
        print("speedup  %14.1fx %14.1fx"
              % (rows[0][1] / rows[1][1], rows[0][2] / rows[1][2]))


if __name__ == "__main__":
    main()
