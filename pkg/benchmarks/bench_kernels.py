"""Compare the compiled and numpy interpolation kernels on batched rows.

Usage: python3 benchmarks/bench_kernels.py [--rows N] [--m M] [--repeats R]

Prints the best-of-R time per kernel for each backend, the speedup and the
largest absolute difference between the two outputs.
"""
import argparse
import time

import numpy as np

from sevenleague.interpolation import barycentric_weights
from sevenleague.kernels import get_backend
from sevenleague.probability import gauss_hermite_normal


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n, m, seed):
    rng = np.random.default_rng(seed)
    x = gauss_hermite_normal(m).nodes
    Y = np.sort(rng.lognormal(size=(n, m)), axis=1)
    q = rng.standard_normal(n)
    w = barycentric_weights(x)
    C = rng.standard_normal((n, m))
    return {
        "pchip_eval": lambda k: k.pchip_eval(x, Y, q, False),
        "pchip_eval (linear)": lambda k: k.pchip_eval(x, Y, q, True),
        "bary_eval": lambda k: k.bary_eval(x, w, Y, q, False),
        "cheb_eval": lambda k: k.cheb_eval(x[0], x[-1], C, q, False),
        "pchip_slopes": lambda k: k.pchip_slopes(x, Y),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=100_000)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    py = get_backend("python")
    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled kernels are not built; only the numpy backend is available")
        cy = None
    print(f"{args.rows} rows, m = {args.m}, best of {args.repeats}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}{'max |diff|':>12}")
    for name, fn in cases(args.rows, args.m, args.seed).items():
        t_py, out_py = best_of(lambda: fn(py), args.repeats)
        if cy is None:
            print(f"{name:<22}{1e3 * t_py:>12.2f}")
            continue
        t_cy, out_cy = best_of(lambda: fn(cy), args.repeats)
        diff = np.max(np.abs(np.asarray(out_py) - np.asarray(out_cy)))
        print(f"{name:<22}{1e3 * t_py:>12.2f}{1e3 * t_cy:>13.2f}{t_py / t_cy:>9.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
