"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_backends.py [--agents N] [--days D] [--repeat R]
"""

import argparse
import time
from datetime import datetime, timedelta

import numpy as np

from procoal import kernels
from procoal.climate import generate_synthetic_climate, resample_hourly
from procoal.prosumer import generate_random_pool, simulate_pool
from procoal.timeseries import deseasonalize


def timeit(fn, repeat):
    fn()  # warm-up (includes JIT compilation on the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(args):
    grid = resample_hourly(generate_synthetic_climate(
        4, 4, datetime(2006, 2, 1), timedelta(days=args.days), 3, 1.5, rng_seed=1))
    pool = generate_random_pool(args.agents, 4, 4, seed=2)
    kernels.use_backend("numpy")
    series = simulate_pool(pool, grid)
    ids = sorted(series)
    base = series[ids[0]].values
    rows = np.stack([series[sid].values for sid in ids])

    cases = {
        "simulate_pool": lambda: simulate_pool(pool, grid),
        "deseasonalize": lambda: deseasonalize(series[ids[0]], 30),
        "batch_stats": lambda: kernels.batch_stats(base, rows),
    }

    results = {}
    for backend in ("numpy", "numba") if kernels.HAS_NUMBA else ("numpy",):
        kernels.use_backend(backend)
        for name, fn in cases.items():
            results[(name, backend)] = timeit(fn, args.repeat)

    print(f"{args.agents} agents x {grid.n_samples} hours, best of {args.repeat}")
    print(f"{'kernel':<16}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>9}")
    for name in cases:
        t_np = results[(name, "numpy")]
        t_nb = results.get((name, "numba"))
        if t_nb is None:
            print(f"{name:<16}{t_np:>12.4f}{'n/a':>12}{'n/a':>9}")
        else:
            print(f"{name:<16}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--agents", type=int, default=200)
    parser.add_argument("--days", type=int, default=365)
    parser.add_argument("--repeat", type=int, default=3)
    bench(parser.parse_args())
