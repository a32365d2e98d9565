"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--grids 250000] [--days 60]
                                       [--instruments 1200] [--repeats 3]

Both paths are always importable, so this compares them in one process
regardless of the AQNETSIM_NO_NUMBA setting.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from aqnetsim import kernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grids", type=int, default=250_000)
    parser.add_argument("--days", type=int, default=60)
    parser.add_argument("--instruments", type=int, default=1_200)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not kernels.HAS_NUMBA:
        print("numba is not importable; nothing to compare")
        return 1
    kernels.warmup()

    rng = np.random.default_rng(0)
    span = 1e6
    qx = rng.uniform(0, span, args.grids)
    qy = rng.uniform(0, span, args.grids)
    ix = rng.uniform(0, span, args.instruments)
    iy = rng.uniform(0, span, args.instruments)

    # scenario-sums workload sized to fit comfortably in memory
    g = min(args.grids, 60_000)
    absdiff = rng.uniform(0, 10, (g, args.days))
    t_cls = rng.integers(0, 6, (g, args.days)).astype(np.int8)
    s_cls = rng.integers(0, 6, (g, args.days)).astype(np.int8)
    err = rng.normal(0, 2, (g, args.days))
    lcs = rng.random(g) < 0.5
    dist = rng.uniform(0, 2e4, g)
    w = rng.uniform(0, 5, g)
    mask = rng.random(g) < 0.8
    order = np.argsort(absdiff, axis=None, kind="stable")
    flat = absdiff.reshape(-1)
    wm = np.where(mask, w, 0.0)

    cx = rng.uniform(0, span, 20)
    cy = rng.uniform(0, span, 20)
    amp = rng.uniform(2, 8, 20)
    scale = rng.uniform(4e3, 2e4, 20)

    cases = [
        (f"nearest_neighbor ({args.grids} queries x {args.instruments} instruments)",
         lambda f: kernels.nearest_neighbor(qx, qy, ix, iy, force=f)),
        (f"scenario_sums ({g} grids x {args.days} days)",
         lambda f: kernels.scenario_sums(absdiff, t_cls, s_cls, err, lcs, dist, w,
                                         mask, force=f)),
        (f"weighted_percentile ({g * args.days} grid-days)",
         lambda f: kernels.weighted_percentile(flat, order, wm, args.days, force=f)),
        (f"gaussian_bumps ({args.grids} grids x 20 hotspots)",
         lambda f: kernels.gaussian_bumps(qx, qy, cx, cy, amp, scale, force=f)),
    ]

    print(f"{'kernel':55s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for label, fn in cases:
        t_numba = timeit(lambda: fn("numba"), args.repeats)
        t_numpy = timeit(lambda: fn("numpy"), args.repeats)
        print(f"{label:55s} {t_numba * 1e3:9.1f}ms {t_numpy * 1e3:9.1f}ms "
              f"{t_numpy / t_numba:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
