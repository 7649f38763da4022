#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends on the hot paths.

Runs each kernel on representative desk-scale inputs and prints a table of
per-call timings plus the speedup. Invoke from the repo root:

    python benchmarks/bench_kernels.py [--repeats 30]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import fareopt.kernels._numpy as knumpy  # noqa: E402

try:
    import fareopt.kernels._numba as knumba
except ImportError:
    knumba = None


def timer(fn, repeats):
    fn()  # warm (and trigger JIT)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def build_cases():
    rng = np.random.default_rng(0)
    n_opt, n_samples, n_cand = 6, 1700, 1000
    attrs = rng.uniform(0, 5, (n_opt, 3))
    modes = np.array([0, 0, 1, 1, 2, 3], dtype=np.int64)
    avail = np.ones(n_opt, dtype=bool)
    samples = rng.uniform(-0.6, 0.6, (n_samples, 7))
    weights = np.full(n_samples, 1.0 / n_samples)
    pool_attrs = rng.uniform(0, 5, (n_cand, n_opt, 3))
    pool_modes = np.tile(modes, (n_cand, 1))
    pool_avail = np.ones((n_cand, n_opt), dtype=bool)
    mh_samples = samples[:100]

    rec_attrs = rng.uniform(0, 5, (10, n_opt, 3))
    rec_modes = np.tile(modes, (10, 1))
    rec_avail = np.ones((10, n_opt), dtype=bool)
    chosen = rng.integers(0, n_opt, 10).astype(np.int64)
    normals = rng.standard_normal((10000, 7))
    log_unifs = np.log(rng.random(10000))

    road_a = np.array([30.0, 45.0])
    road_cap = np.array([900.0, 600.0])
    road_cost = np.array([15.0, 9.0])
    fares = np.array([12.0, 8.0])
    scale = np.array([6.0, 2.0, 6.0])
    group_offsets = np.array([0, 1000, 1700], dtype=np.int64)
    group_avail = np.ones((2, n_opt), dtype=bool)
    group_avail[1, :2] = False
    f0 = np.full(n_opt, 500.0)

    def cases(k):
        return {
            "shares_for_group (1700x6)": lambda: k.shares_for_group(
                attrs, modes, avail, samples, weights
            ),
            "info_gain_scores (1000x100x6)": lambda: k.info_gain_scores(
                pool_attrs, pool_modes, pool_avail, mh_samples
            ),
            "mh_chain (10k steps, 10 records)": lambda: k.mh_chain(
                rec_attrs, rec_modes, rec_avail, chosen, False,
                np.zeros(7), 0.05, normals, log_unifs,
            ),
            "equilibrium_loop (500 iters)": lambda: k.equilibrium_loop(
                road_a, road_cap, road_cost, 0.15, 4.0, 1.0,
                True, 35.0, 1500.0, 3.0, 10.0, True, 120.0, 1.0,
                fares, 3000.0, scale, modes, group_avail, group_avail,
                group_avail, 0, 1.0, samples, weights, group_offsets,
                f0, 0.5, 1e-12, 500, 10**9, -1.0,
            ),
        }

    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    cases = build_cases()
    numpy_times = {name: timer(fn, args.repeats) for name, fn in cases(knumpy).items()}
    numba_times = (
        {name: timer(fn, args.repeats) for name, fn in cases(knumba).items()}
        if knumba is not None else {}
    )

    width = max(len(name) for name in numpy_times)
    header = f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, numpy_time in numpy_times.items():
        if numba_times:
            numba_time = numba_times[name]
            print(f"{name:<{width}}  {numpy_time * 1e3:>8.2f}ms  "
                  f"{numba_time * 1e3:>8.2f}ms  {numpy_time / numba_time:>7.1f}x")
        else:
            print(f"{name:<{width}}  {numpy_time * 1e3:>8.2f}ms  {'n/a':>10}  {'n/a':>8}")
    if not numba_times:
        print("numba not importable; showing the numpy fallback only")


if __name__ == "__main__":
    main()
