"""Benchmark the compiled tile-coding kernels against the numpy fallback.

Times the per-period hot path (the action-value scan over the full action
space) and the single-pair featurization, for a range of action-space sizes,
and verifies both backends agree bit-for-bit on every workload.

Usage: python benchmarks/bench_kernels.py [--sizes 100,370,1000,5000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vranrl import _kernels as py_kernels

try:
    from vranrl import _speedups as c_kernels
except ImportError:
    c_kernels = None


def time_call(fn, repeats=5, inner=200):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench(sizes: list[int]) -> None:
    rng = np.random.default_rng(0)
    tilings, segment = 8, 512
    weights = rng.normal(size=tilings * segment)
    coords = rng.integers(0, 16, size=(tilings, 5)).astype(np.int64)
    keys = py_kernels.fold_keys(coords, seed=3)

    backends = [("python", py_kernels)]
    if c_kernels is not None:
        assert np.array_equal(keys, c_kernels.fold_keys(coords, seed=3))
        backends.append(("compiled", c_kernels))
    else:
        print("compiled backend not built; benchmarking the fallback only")

    print(f"{'op':<26} {'|A|':>6} " + "".join(f"{name:>12}" for name, _ in backends)
          + ("{:>10}".format("speedup") if len(backends) == 2 else ""))
    for n in sizes:
        times = []
        for _, impl in backends:
            times.append(time_call(lambda impl=impl: impl.scan_q(keys, n, segment, weights)))
        if len(backends) == 2:
            a = py_kernels.scan_q(keys, n, segment, weights)
            b = c_kernels.scan_q(keys, n, segment, weights)
            assert np.array_equal(a, b), "backend outputs diverged"
        row = f"{'scan_q (action values)':<26} {n:>6} " + "".join(
            f"{t * 1e6:>10.1f}us" for t in times
        )
        if len(backends) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

    times = []
    for _, impl in backends:
        times.append(
            time_call(lambda impl=impl: impl.features_for_action(keys, 42, segment))
        )
    row = f"{'features_for_action':<26} {'-':>6} " + "".join(
        f"{t * 1e6:>10.1f}us" for t in times
    )
    if len(backends) == 2:
        row += f"{times[0] / times[1]:>9.1f}x"
    print(row)

    times = []
    for _, impl in backends:
        times.append(time_call(lambda impl=impl: impl.fold_keys(coords, 3)))
    row = f"{'fold_keys':<26} {'-':>6} " + "".join(
        f"{t * 1e6:>10.1f}us" for t in times
    )
    if len(backends) == 2:
        row += f"{times[0] / times[1]:>9.1f}x"
    print(row)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument(
        "--sizes", default="100,370,1000,5000",
        help="comma-separated action-space sizes",
    )
    args = ap.parse_args()
    bench([int(s) for s in args.sizes.split(",")])


if __name__ == "__main__":
    main()
