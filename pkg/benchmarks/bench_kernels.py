"""Compare the compiled and plain-numpy kernel backends.

Run:  python3 benchmarks/bench_kernels.py [--repeats N]

Reports per-call wall time for gelu forward/gradient and row softmax at the
shapes the toy training loop actually uses. On single-core hosts the
compiled loops only roughly match numpy's vectorized kernels; the losers
are printed honestly rather than hidden.
"""

import argparse
import time

import numpy as np

from turbotrain import kernels


def clock(fn, x, repeats):
    fn(x)  # warm (JIT compile on first call)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(x)
    return (time.perf_counter() - t0) / repeats * 1e3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    if not kernels.NUMBA_ACTIVE:
        print("compiled backend disabled (TURBO_NO_NUMBA set); nothing to compare")
        return

    rng = np.random.default_rng(0)
    cases = [
        ("gelu fwd  (32,65,256)", kernels.gelu_numba, kernels.gelu_numpy,
         rng.standard_normal((32, 65, 256)).astype(np.float32)),
        ("gelu grad (32,65,256)", kernels.gelu_grad_numba, kernels.gelu_grad_numpy,
         rng.standard_normal((32, 65, 256)).astype(np.float32)),
        ("softmax   (8320,65)", kernels.softmax2d_numba, kernels.softmax2d_numpy,
         np.ascontiguousarray(rng.standard_normal((8320, 65)).astype(np.float32))),
        ("softmax   (128,1024)", kernels.softmax2d_numba, kernels.softmax2d_numpy,
         np.ascontiguousarray(rng.standard_normal((128, 1024)).astype(np.float32))),
    ]
    print(f"{'case':<24} {'compiled ms':>12} {'numpy ms':>10} {'speedup':>8}")
    for name, fast, ref, x in cases:
        t_fast = clock(fast, x, args.repeats)
        t_ref = clock(ref, x, args.repeats)
        print(f"{name:<24} {t_fast:12.3f} {t_ref:10.3f} {t_ref / t_fast:8.2f}x")


if __name__ == "__main__":
    main()
