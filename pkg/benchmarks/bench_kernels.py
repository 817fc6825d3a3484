#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-numpy fallback.

Both backends are imported side by side from specvi.kernels, so the
comparison runs in one process regardless of the SPECVI_NUMBA setting.

    python3 benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from specvi import kernels


def _instance(K, seed):
    rng = np.random.default_rng(seed)
    A = rng.random((K, K))
    A /= A.sum(axis=1, keepdims=True)
    b = rng.random(K)
    return A, b


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_affine_iteration(repeats):
    print("affine_iteration (alpha=0.999, tol=1e-14, max_iter=100000)")
    for K in (4, 16, 64, 256):
        A, b = _instance(K, K)
        args = (A, b, 0.999, 1e-14, 100000, 1e12, 0)
        t_np = _best_of(lambda: kernels.affine_iteration_numpy(*args), repeats)
        if kernels.HAS_NUMBA:
            kernels.affine_iteration_jit(*args)  # warm the compile cache
            t_jit = _best_of(lambda: kernels.affine_iteration_jit(*args), repeats)
            print(f"  K={K:4d}  numpy {t_np * 1e3:9.2f} ms   numba {t_jit * 1e3:9.2f} ms   speedup {t_np / t_jit:6.1f}x")
        else:
            print(f"  K={K:4d}  numpy {t_np * 1e3:9.2f} ms   (numba unavailable)")


def bench_horner(repeats):
    print("horner_partial_sum (alpha=0.95, k=2000)")
    for K in (4, 16, 64, 256):
        A, b = _instance(K, K + 1)
        args = (A, b, 0.95, 2000, 1e12)
        t_np = _best_of(lambda: kernels.horner_partial_sum_numpy(*args), repeats)
        if kernels.HAS_NUMBA:
            kernels.horner_partial_sum_jit(*args)
            t_jit = _best_of(lambda: kernels.horner_partial_sum_jit(*args), repeats)
            print(f"  K={K:4d}  numpy {t_np * 1e3:9.2f} ms   numba {t_jit * 1e3:9.2f} ms   speedup {t_np / t_jit:6.1f}x")
        else:
            print(f"  K={K:4d}  numpy {t_np * 1e3:9.2f} ms   (numba unavailable)")


def bench_power_vanishing(repeats):
    print("power_max_norms (k_max=10000, threshold=1e-12)")
    for K in (4, 16, 64):
        rng = np.random.default_rng(K)
        A = rng.random((K, K))
        A *= 0.999 / np.abs(np.linalg.eigvals(A)).max()
        args = (A, 10000, 1e-12)
        t_np = _best_of(lambda: kernels.power_max_norms_numpy(*args), repeats)
        if kernels.HAS_NUMBA:
            kernels.power_max_norms_jit(*args)
            t_jit = _best_of(lambda: kernels.power_max_norms_jit(*args), repeats)
            print(f"  K={K:4d}  numpy {t_np * 1e3:9.2f} ms   numba {t_jit * 1e3:9.2f} ms   speedup {t_np / t_jit:6.1f}x")
        else:
            print(f"  K={K:4d}  numpy {t_np * 1e3:9.2f} ms   (numba unavailable)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="best-of repeats per point")
    args = parser.parse_args()
    print(f"selected backend for the library: {kernels.ACTIVE_BACKEND}")
    bench_affine_iteration(args.repeats)
    bench_horner(args.repeats)
    bench_power_vanishing(args.repeats)


if __name__ == "__main__":
    main()
