#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

The three backend entry points are the hot loops of the harness:

  convolve  principal-value circular convolution (one operator application)
  window    per-node minimal qualifying windows (one BMO_alpha norm sweep)
  hullosc   hull-restricted oscillation at every ball (one BO-constant trial)

Run: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from oscbox._backend import available_backends
from oscbox.ball_basis import build_dyadic_tree
from oscbox.random_functions import rng_for_trial


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_convolve(backend, n, repeat):
    rng = rng_for_trial(1, n)
    kern = np.zeros(n)
    kern[1:] = rng.uniform(-1, 1, n - 1)
    vals = rng.uniform(-1, 1, n)
    backend.circular_convolve_pv(kern, vals)  # warm any cache
    return timeit(lambda: backend.circular_convolve_pv(kern, vals), repeat)


def bench_window(backend, depth, repeat):
    tree = build_dyadic_tree(depth, 1)
    rng = rng_for_trial(2, depth)
    vals = rng.uniform(-1, 1, tree.n_leaves)
    gather, starts, ends = tree.node_segments
    seg_ids = np.repeat(np.arange(tree.n_nodes), ends - starts)
    g = vals[gather]
    order = np.lexsort((g, seg_ids))
    sv = g[order]
    cw = np.cumsum(tree.leaf_measure[gather][order])
    thr = 0.9 * tree.measure
    return timeit(lambda: backend.segment_min_window(sv, cw, starts, ends, thr),
                  repeat)


def bench_hullosc(backend, n, repeat):
    tree = build_dyadic_tree(int(np.log2(n)), 1)
    rng = rng_for_trial(3, n)
    kern = np.zeros(n)
    kern[1:] = rng.uniform(-1, 1, n - 1)
    vals = rng.uniform(-1, 1, n)
    tvals = backend.circular_convolve_pv(kern, vals)
    h = tree.hull_id
    args = (kern, vals, tvals, tree.leaf_lo, tree.leaf_hi,
            tree.leaf_lo[h], tree.leaf_hi[h])
    return timeit(lambda: backend.hull_restricted_osc(*args), repeat)


CASES = [
    ("convolve n=512", bench_convolve, 512),
    ("convolve n=2048", bench_convolve, 2048),
    ("window depth=8", bench_window, 8),
    ("window depth=12", bench_window, 12),
    ("hullosc n=512", bench_hullosc, 512),
    ("hullosc n=2048", bench_hullosc, 2048),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = available_backends()
    names = [b.IMPL for b in backends]
    print(f"backends: {', '.join(names)}")
    header = f"{'case':20s}" + "".join(f"{n:>12s}" for n in names)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for label, fn, size in CASES:
        times = [fn(b, size, args.repeat) for b in backends]
        row = f"{label:20s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2 and times[0] > 0:
            row += f"{times[1] / times[0]:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
