"""Time the compiled dense quadrature kernel against the numpy fallback.

    python benchmarks/bench_dense_apply.py [--repeat 5]

Prints one row per problem size with the best wall time of each backend and
the largest absolute difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from opwlab import _kernels_py

try:
    from opwlab import _kernels
except ImportError:  # extension not built
    _kernels = None

SIZES = [(17, 33, 1024), (65, 65, 2048), (129, 129, 4096), (256, 256, 4096)]


def problem(nt, nv, nx, seed=0):
    rng = np.random.default_rng(seed)
    dx = 1 / 64
    eta = rng.standard_normal((nt, nv)) + 1j * rng.standard_normal((nt, nv))
    nu = (np.arange(nv) - nv // 2) * 0.05
    x = (np.arange(nx) - nx // 2) * dx
    f = rng.standard_normal(nx) + 1j * rng.standard_normal(nx)
    return eta, nu, x, f, -(nt // 2), dx, 0.05


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'nt':>4} {'nv':>4} {'nx':>5} {'numpy [s]':>10} {'compiled [s]':>12} {'speedup':>8} {'max diff':>9}")
    for nt, nv, nx in SIZES:
        prob = problem(nt, nv, nx)
        t_py = best_time(_kernels_py.dense_apply, prob, args.repeat)
        if _kernels is None:
            print(f"{nt:4d} {nv:4d} {nx:5d} {t_py:10.4f} {'n/a':>12}")
            continue
        t_c = best_time(_kernels.dense_apply, prob, args.repeat)
        diff = np.abs(_kernels.dense_apply(*prob) - _kernels_py.dense_apply(*prob)).max()
        print(f"{nt:4d} {nv:4d} {nx:5d} {t_py:10.4f} {t_c:12.4f} {t_py / t_c:8.2f} {diff:9.1e}")


if __name__ == "__main__":
    main()
