#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel paths on the hot loops.

Run from the repo root:

    python benchmarks/bench_kernels.py [n_cells]

The same workloads run through both implementations (the env flag
FECIM_NO_NUMBA=1 selects the numpy path package-wide; here both are called
directly). Typical speedups on one core are ~5-20x for the node solve.
"""

import sys
import time

import numpy as np

from fecim import kernels


def bench(fn, args, repeats=5):
    fn(*args)  # warm-up / JIT
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    rng = np.random.default_rng(0)
    wl1 = rng.uniform(-0.3, 0.4, n)
    wl2 = np.full(n, 0.35)
    vth1 = rng.uniform(0.1, 0.6, n)
    vth2 = rng.uniform(0.1, 0.8, n)
    g = np.full(n, 6.7e-6)
    xi = np.full(n, 1.012)
    v_dl = np.full(n, 0.4)
    v_t = np.full(n, 0.025865)

    print(f"kernel benchmark, n = {n}, numba available: {kernels.USING_NUMBA}")

    args_cur = (wl1, v_dl, vth1, g, xi, v_t)
    t_np = bench(kernels.device_current_np, args_cur)
    print(f"device_current  numpy: {t_np * 1e3:8.2f} ms")
    if kernels.USING_NUMBA:
        t_nb = bench(kernels.device_current, args_cur)
        print(f"device_current  numba: {t_nb * 1e3:8.2f} ms   ({t_np / t_nb:.1f}x)")

    args_vs = (wl1, wl2, vth1, vth2, g, g, xi, xi, v_dl, v_t)
    t_np = bench(kernels.solve_vs_np, args_vs)
    print(f"solve_vs        numpy: {t_np * 1e3:8.2f} ms")
    if kernels.USING_NUMBA:
        t_nb = bench(kernels.solve_vs, args_vs)
        print(f"solve_vs        numba: {t_nb * 1e3:8.2f} ms   ({t_np / t_nb:.1f}x)")
        a = kernels.solve_vs(*args_vs)
        b = kernels.solve_vs_np(*args_vs)
        print(f"max |delta V_S| between paths: {np.max(np.abs(a - b)):.2e} V")


if __name__ == "__main__":
    main()
