#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot loops (QR spectrum accumulation, single-vector
growth, plain product chains) on a synthetic generator chain and prints a
steps-per-second table with the speedup.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [steps]
"""

import sys
import time

import numpy as np

from cocyclelab import _kernels_py as kpy

try:
    from cocyclelab import _kernels as kcomp
except ImportError:
    kcomp = None


def make_chain(steps, d=2, seed=0):
    rng = np.random.default_rng(seed)
    angles = np.cumsum(np.full(steps, (np.sqrt(5) - 1) / 2)) % 1.0
    bump = 0.3 * np.cos(2 * np.pi * angles)
    mats = np.zeros((steps, d, d))
    mats[:, 0, 0] = np.exp(0.5 + bump)
    mats[:, 1, 1] = np.exp(-0.5 + bump)
    rot = rng.standard_normal((d, d)) * 0.05
    return np.ascontiguousarray(mats + rot)


def bench(fn, *args, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def run(steps):
    mats = make_chain(steps)
    d = mats.shape[1]
    rows = []

    def qr_case(mod):
        Q = np.eye(d)
        mod.qr_chain(mats, Q, 10, 0)

    def vec_case(mod):
        w = np.array([1.0, 0.0])
        mod.vector_chain(mats, w)

    def prod_case(mod):
        M = np.eye(d)
        mod.product_chain(mats, M)

    for name, case in (("qr_chain", qr_case), ("vector_chain", vec_case),
                       ("product_chain", prod_case)):
        t_py = bench(case, kpy)
        t_c = bench(case, kcomp) if kcomp is not None else None
        rows.append((name, t_py, t_c))

    print(f"chain: {steps} steps, d={d}")
    print(f"{'kernel':<16} {'python (steps/s)':>18} {'compiled (steps/s)':>20} {'speedup':>9}")
    for name, t_py, t_c in rows:
        py_rate = steps / t_py
        if t_c is None:
            print(f"{name:<16} {py_rate:>18.3g} {'unavailable':>20} {'-':>9}")
        else:
            print(f"{name:<16} {py_rate:>18.3g} {steps / t_c:>20.3g} "
                  f"{t_py / t_c:>8.1f}x")
    if kcomp is None:
        print("compiled extension not built; install with `pip install -e .`")


if __name__ == "__main__":
    run(int(sys.argv[1]) if len(sys.argv) > 1 else 200_000)
