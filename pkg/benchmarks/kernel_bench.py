"""Timing comparison of the compiled and plain-numpy kernel paths.

Run directly:  python benchmarks/kernel_bench.py
The PLASMAFEM_NUMBA environment flag selects the lane the package uses at
import time; this script times both implementations side by side.
"""
import time

import numpy as np

from plasmafem import kernels
from plasmafem.poly import exponents


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"compiled path available: {kernels.USING_NUMBA}")

    pts = rng.standard_normal((200000, 2))
    exps = exponents(6)
    a = rng.standard_normal((4096, 24, 16, 2))
    b = rng.standard_normal((4096, 24, 16, 2))
    w = rng.standard_normal((4096, 16))
    tens = rng.standard_normal((4096, 2, 2)) + 1j * rng.standard_normal((4096, 2, 2))
    vals = rng.standard_normal((4096, 24, 16, 2))

    cases = [
        ("eval_terms", (pts, exps)),
        ("weighted_inner", (a, b, w)),
        ("apply_tensor", (tens, vals)),
    ]
    for name, args in cases:
        t_np = timeit(getattr(kernels, name + "_numpy"), *args)
        row = f"{name:16s} numpy {t_np * 1e3:8.2f} ms"
        if kernels.USING_NUMBA:
            t_nb = timeit(getattr(kernels, name), *args)
            row += f"   compiled {t_nb * 1e3:8.2f} ms   speedup {t_np / t_nb:5.2f}x"
        print(row)


if __name__ == "__main__":
    main()
