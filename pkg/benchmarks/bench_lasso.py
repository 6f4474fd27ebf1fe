"""Compare the compiled and pure-Python coordinate-descent backends.

Usage: python benchmarks/bench_lasso.py [--n 500] [--p 15] [--lambdas 100] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tsce import _kernels


def bench(backend, X, y, lams, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        path = _kernels.lasso_path(X, y, lams, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--p", type=int, default=15)
    ap.add_argument("--lambdas", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    X = rng.normal(size=(args.n, args.p))
    beta = np.where(rng.random(args.p) < 0.3, rng.normal(size=args.p), 0.0)
    y = X @ beta + 0.1 * rng.normal(size=args.n)
    X -= X.mean(axis=0)
    y -= y.mean()
    lam_max = np.abs(X.T @ y).max() / args.n
    lams = np.geomspace(lam_max, lam_max * 1e-3, args.lambdas)

    print(f"n={args.n} p={args.p} lambdas={args.lambdas} (best of {args.repeat})")
    t_py, path_py = bench("python", X, y, lams, args.repeat)
    print(f"python  {t_py * 1e3:9.2f} ms")
    if _kernels.BACKEND != "cython":
        print("cython  not built; run `pip install -e . --no-build-isolation` with Cython available")
        return
    t_cy, path_cy = bench("cython", X, y, lams, args.repeat)
    print(f"cython  {t_cy * 1e3:9.2f} ms   speed-up x{t_py / t_cy:.1f}")
    print(f"max |difference| between paths: {np.abs(path_py - path_cy).max():.2e}")


if __name__ == "__main__":
    main()
