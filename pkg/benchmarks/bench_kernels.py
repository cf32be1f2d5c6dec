"""Compare the numba and numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both paths are called directly, so one process times both.  The numba
timings exclude the first (compiling) call.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from spaceval import _kernels


def _best(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_lcs(rng: np.random.Generator, repeat: int) -> list[tuple]:
    rows = []
    for n in (30, 200, 1000):
        a = rng.integers(0, 60, n)
        b = rng.integers(0, 60, n)
        number = max(1, 2000 // n)
        t_np = _best(lambda: _kernels.lcs_length_numpy(a, b), repeat, number)
        row = ["lcs", n, t_np, None]
        if _kernels.HAVE_NUMBA:
            assert _kernels._lcs_length_jit(a, b) == _kernels.lcs_length_numpy(a, b)
            row[3] = _best(lambda: _kernels._lcs_length_jit(a, b), repeat, number)
        rows.append(tuple(row))
    return rows


def bench_components(rng: np.random.Generator, repeat: int) -> list[tuple]:
    rows = []
    for n in (12, 100, 400):
        adj = rng.random((n, n)) < 1.5 / n
        adj |= adj.T
        number = max(1, 4000 // n)
        t_np = _best(lambda: _kernels.components_numpy(adj), repeat, number)
        row = ["components", n, t_np, None]
        if _kernels.HAVE_NUMBA:
            assert np.array_equal(_kernels._components_jit(adj), _kernels.components_numpy(adj))
            row[3] = _best(lambda: _kernels._components_jit(adj), repeat, number)
        rows.append(tuple(row))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    rows = bench_lcs(rng, args.repeat) + bench_components(rng, args.repeat)
    print(f"active backend: {_kernels.BACKEND}")
    print(f"{'kernel':<11} {'n':>5} {'numpy (us)':>12} {'numba (us)':>12} {'speedup':>8}")
    for name, n, t_np, t_nb in rows:
        nb = "-" if t_nb is None else f"{t_nb * 1e6:12.1f}"
        sp = "-" if t_nb is None else f"{t_np / t_nb:7.1f}x"
        print(f"{name:<11} {n:>5} {t_np * 1e6:12.1f} {nb:>12} {sp:>8}")


if __name__ == "__main__":
    main()
