"""Benchmark the compiled kernels against the pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py
The same module-level functions are timed through both backends; the engine
picks whichever is importable at run time (POINTSEL_PURE=1 forces the
fallback), so this quantifies what the extension buys per frame.
"""

from __future__ import annotations

import time

import numpy as np

from pointsel import _kernels_py

try:
    from pointsel import _native
except ImportError:
    _native = None


def bench(fn, args, repeats=200):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def centroid_args(n, seed=0):
    rng = np.random.default_rng(seed)
    us = rng.uniform(0, 640, n)
    vs = rng.uniform(0, 480, n)
    zs = rng.uniform(0.2, 2.0, n)
    return (us, vs, zs, 600.0, 600.0, 320.0, 240.0, 2.0, 0.001)


def ray_args(n, seed=1):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, (n, 3))
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    return (pts, np.zeros(3), d)


def main():
    rows = []
    for label, maker, sizes in (
        ("masked_centroid", centroid_args, (100, 1000, 10000)),
        ("ray_distances", ray_args, (6, 100, 1000)),
    ):
        for n in sizes:
            args = maker(n)
            t_py = bench(getattr(_kernels_py, label), args)
            if _native is not None:
                t_nat = bench(getattr(_native, label), args)
                speedup = f"{t_py / t_nat:5.1f}x"
                nat_us = f"{t_nat * 1e6:10.1f}"
            else:
                speedup, nat_us = "  n/a", "       n/a"
            rows.append(f"{label:<18}{n:>8}{t_py * 1e6:>12.1f}{nat_us:>12}{speedup:>9}")

    print(f"{'kernel':<18}{'n':>8}{'python us':>12}{'native us':>12}{'speedup':>9}")
    print("\n".join(rows))
    if _native is None:
        print("\nnative extension not built; showing fallback only")


if __name__ == "__main__":
    main()
