#!/usr/bin/env python3
"""Time the hot kernels on both backends (numba @njit vs pure numpy).

Usage: python benchmarks/bench_kernels.py [--n-v 32] [--n-x 100] [--repeat 5]

The two backends evaluate identical expressions in the same order, so this
also asserts agreement before timing.
"""

import argparse
import time

import numpy as np

from kap import kernels
from kap.collision import precompute_kernel_modes, to_modes
from kap.grid import VelocityGrid


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-v", type=int, default=32)
    ap.add_argument("--n-x", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    vg = VelocityGrid(args.n_v, 7.0)
    km = precompute_kernel_modes(vg)
    f = rng.random((args.n_x, args.n_v, args.n_v))
    c = to_modes(f, args.n_v)
    c[:, 0, :] = 0.0
    c[:, :, 0] = 0.0
    c = np.ascontiguousarray(np.moveaxis(c, 0, -1))
    fe = rng.random((args.n_x + 4, args.n_v, args.n_v))

    results = {}
    for backend in ("numba", "numpy"):
        try:
            kernels.set_backend(backend)
        except ImportError:
            print(f"{backend}: unavailable")
            continue
        kernels.conv_modes(c, km.table, km.diag)  # warm up (JIT)
        kernels.muscl_rhs(fe, vg.nodes, 0.01)
        results[backend, "conv"] = timeit(lambda: kernels.conv_modes(c, km.table, km.diag), args.repeat)
        results[backend, "muscl"] = timeit(lambda: kernels.muscl_rhs(fe, vg.nodes, 0.01), args.repeat)

    kernels.set_backend("numba")
    a1 = kernels.conv_modes(c, km.table, km.diag)
    a2 = kernels.muscl_rhs(fe, vg.nodes, 0.01)
    kernels.set_backend("numpy")
    b1 = kernels.conv_modes(c, km.table, km.diag)
    b2 = kernels.muscl_rhs(fe, vg.nodes, 0.01)
    agree = np.allclose(a1, b1, rtol=1e-14) and np.array_equal(a2, b2)

    print(f"grid: n_v={args.n_v}, n_x={args.n_x}; backends agree: {agree}")
    for (backend, kernel), secs in sorted(results.items()):
        print(f"{backend:6s} {kernel:6s} {secs * 1e3:9.2f} ms")
    for kernel in ("conv", "muscl"):
        if ("numba", kernel) in results and ("numpy", kernel) in results:
            ratio = results["numpy", kernel] / results["numba", kernel]
            print(f"speedup {kernel}: numba is {ratio:.1f}x vs numpy")


if __name__ == "__main__":
    main()
