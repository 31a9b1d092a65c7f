"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel runs on both backends with identical inputs; outputs are
checked for agreement before timings are reported.
"""

import argparse
import time

import numpy as np

from rvlab import _fallback
from rvlab.kernels import _buffer

try:
    from rvlab import _kernels
except ImportError:
    _kernels = None

KEY = 0x9E3779B97F4A7C15


def cases():
    thr = _buffer(np.sort(np.array([1e-4, 1e-3, 1e-2])))
    rng = np.random.default_rng(0)
    values = _buffer(rng.pareto(1.0, size=(2000, 257)))
    top = _buffer(np.sort(rng.pareto(1.0, size=100_001))[::-1])
    return {
        "uniform_fill 1e7": lambda b: b.uniform_fill(KEY, 0, 10_000_000),
        "block_min_counts 1000x10^4": lambda b: b.block_min_counts(KEY, 0, 1000, 10_000, thr),
        "sliding_range 2000x257 w=26": lambda b: b.sliding_range(values, 26),
        "hill_log_sum k=10^5": lambda b: b.hill_log_sum(top, 100_000),
    }


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    # streams and counts must be bit identical; float reductions may differ in summation order
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim == 0:
        return bool(np.isclose(a, b, rtol=1e-12, atol=0.0))
    return np.array_equal(a, b)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':32s} {'fallback s':>11s} {'compiled s':>11s} {'speedup':>8s}  equal")
    for name, run in cases().items():
        t_py, out_py = best_of(lambda: run(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:32s} {t_py:11.4f} {'-':>11s} {'-':>8s}  -")
            continue
        t_c, out_c = best_of(lambda: run(_kernels), args.repeat)
        print(f"{name:32s} {t_py:11.4f} {t_c:11.4f} {t_py / t_c:8.1f}x  {same(out_py, out_c)}")


if __name__ == "__main__":
    main()
