#!/usr/bin/env python3
"""Benchmark the compiled rating-matrix kernels against the NumPy fallback.

Run from the repo root after building the extension in place:

    python setup.py build_ext --inplace
    python benchmarks/bench_kernels.py

Shapes mirror what the simulator actually feeds the kernels: tens of users
(one per subscriber device) by hundreds of items, mostly unrated.
"""

import time

import numpy as np

from cofigel import _core_py

try:
    from cofigel import _core
except ImportError:
    _core = None


def random_values(rng, n_users, n_items, rated=0.25, positive=0.5):
    vals = np.full((n_users, n_items), -1, dtype=np.int8)
    mask = rng.random((n_users, n_items)) < rated
    vals[mask] = (rng.random(mask.sum()) < positive).astype(np.int8)
    return np.ascontiguousarray(vals)


def bench(fn, *args, repeat=20):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(7)
    # (users, items, rated density): sparse cases are what the simulator
    # sees for most of a run; the dense large case favours BLAS.
    shapes = [(20, 200, 0.10), (56, 900, 0.08), (56, 900, 0.30),
              (100, 2000, 0.25)]
    print(f"{'case':>18} {'kernel':>14} {'numpy (ms)':>12} "
          f"{'compiled (ms)':>14} {'speedup':>8}")
    for n_users, n_items, density in shapes:
        vals = random_values(rng, n_users, n_items, rated=density)
        _, ranks, pred, _ = _core_py.base_derive(vals)
        tie = np.arange(n_items, dtype=np.int64)
        cases = [
            ("base_derive", lambda m: m.base_derive(vals)),
            ("label_derive", lambda m: m.label_derive(ranks, pred, 10, tie)),
            ("gain_vector", lambda m: m.gain_vector(vals, pred, 0)),
            ("gain_best", lambda m: m.gain_best(vals, pred)),
        ]
        case = f"{n_users}x{n_items}@{density:.2f}"
        for name, call in cases:
            t_py = bench(call, _core_py)
            if _core is None:
                print(f"{case:>18} {name:>14} {t_py * 1e3:12.3f} "
                      f"{'unavailable':>14}")
                continue
            t_c = bench(call, _core)
            print(f"{case:>18} {name:>14} {t_py * 1e3:12.3f} "
                  f"{t_c * 1e3:14.3f} {t_py / t_c:7.1f}x")
    if _core is None:
        print("\ncompiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
