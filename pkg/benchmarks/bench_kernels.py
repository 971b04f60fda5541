#!/usr/bin/env python3
"""Benchmark the jitted kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py [--repeats 50]

Shapes mirror production use: a 4-frame 16x16x1024 chunk for the pooling
kernels, a 128-chunk 1024-dim bank for scoring and the soft-match
forward/backward, and an 8 MiB payload for the checksum. The dispatch flag
(CHUNKSEEK_NUMBA=0) does not matter here; both implementations are invoked
directly.
"""

import argparse
import time

import numpy as np

from chunkseek import kernels


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    chunk = rng.standard_normal((4, 16, 16, 1024))
    down = kernels.window_mean_numpy(chunk, 2)
    query = rng.standard_normal(1024)
    bank = rng.standard_normal((128, 1024))
    payload = rng.integers(0, 256, size=8 * 1024 * 1024, dtype=np.uint8).tobytes()

    cases = [
        ("window_mean 4x16x16x1024 s2", lambda: kernels.window_mean_numpy(chunk, 2),
         lambda: kernels._window_mean_jit(chunk, 2)),
        ("pool_tokens 4x8x8x1024", lambda: kernels.pool_tokens_numpy(down),
         lambda: kernels._pool_tokens_jit(down)),
        ("cosine_scores 128x1024", lambda: kernels.cosine_scores_numpy(query, bank),
         lambda: kernels._cosine_scores_jit(query, bank)),
        ("soft_match 128x1024", lambda: kernels.soft_match_numpy(query, bank),
         lambda: kernels._soft_match_jit(query, bank)),
        ("fnv1a64 8 MiB", lambda: kernels.fnv1a64_numpy(payload),
         lambda: kernels._fnv1a64_via_jit(payload)),
    ]

    print(f"{'kernel':<30} {'numpy ms':>10} {'numba ms':>10} {'speedup':>9}")
    for name, numpy_fn, jit_fn in cases:
        jit_fn()  # trigger compilation outside the timed region
        repeats = args.repeats if "fnv" not in name else max(1, args.repeats // 10)
        t_numpy = best_of(numpy_fn, repeats)
        t_jit = best_of(jit_fn, repeats)
        print(f"{name:<30} {t_numpy * 1e3:>10.3f} {t_jit * 1e3:>10.3f} {t_numpy / t_jit:>8.1f}x")
    print("\nnote: the query MLP stays on numpy BLAS either way; a naive jitted")
    print("matmul loses to BLAS, so it is not part of the kernel set.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
