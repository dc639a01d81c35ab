"""Compare the compiled kernel core against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py
"""
import time

import numpy as np

from oraclemarch import _pykernels, kernels

if not kernels.NATIVE:
    raise SystemExit("compiled kernels not built; run pip install -e . first")
from oraclemarch import _native  # noqa: E402


def timeit(fn, repeats=20):
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def main():
    rng = np.random.default_rng(0)
    target = (rng.random((64, 64, 32)) * (rng.random((64, 64, 32)) > 0.6)).astype(np.float32)
    pdf = rng.random((4096, 32))
    edges = np.linspace(0.0, 15.0, 33)
    u = np.broadcast_to((np.arange(4) + 0.5) / 4, (4096, 4)).copy()
    rgb = rng.random((4096, 4, 3)).astype(np.float32)
    alpha = rng.random((4096, 4)).astype(np.float32)
    bg = np.zeros(3, dtype=np.float32)
    g_out = rng.standard_normal((4096, 3)).astype(np.float32)
    g_acc = np.zeros(4096, dtype=np.float32)

    cases = [
        ("neighborhood_filter 64x64x32 k=5",
         lambda m: m.neighborhood_filter(target, 5)),
        ("depth_smooth 64x64x32 z=5",
         lambda m: m.depth_smooth(target, 5)),
        ("inverse_cdf 4096x32 -> 4",
         lambda m: m.inverse_cdf(pdf, edges, u)),
        ("composite_forward 4096x4",
         lambda m: m.composite_forward(rgb, alpha, bg)),
        ("composite_backward 4096x4",
         lambda m: m.composite_backward(rgb, alpha, bg, g_out, g_acc)),
    ]

    print(f"{'kernel':<36} {'native ms':>10} {'numpy ms':>10} {'speedup':>8}")
    print("-" * 68)
    for name, fn in cases:
        t_native = timeit(lambda: fn(_native))
        t_python = timeit(lambda: fn(_pykernels))
        print(f"{name:<36} {t_native:>10.3f} {t_python:>10.3f} {t_python / t_native:>7.1f}x")


if __name__ == "__main__":
    main()
