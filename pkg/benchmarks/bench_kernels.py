#!/usr/bin/env python3
"""Compiled vs numpy inner kernel: agreement and timings.

    python benchmarks/bench_kernels.py [--rows 2000] [--repeat 5] [--csv out.csv]
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from nsi_ibp import _kernels_py, em
from nsi_ibp.quadrature import DEFAULT_RULE

try:
    from nsi_ibp import _kernels
except ImportError:
    _kernels = None


def make_rows(n, seed=0):
    rng = np.random.default_rng(seed)
    R = rng.uniform(1e-6, 1.0, n)
    s_lo = np.zeros(n)
    s_hi = rng.uniform(0.01, 1.0, n)
    alpha = rng.normal(size=n)
    beta = rng.normal(size=n)
    t_lo = np.ones(n, dtype=bool)
    t_hi = rng.random(n) < 0.2
    return R, s_lo, s_hi, alpha, beta, 1.0, t_lo, t_hi, DEFAULT_RULE.nodes, DEFAULT_RULE.weights, DEFAULT_RULE.panels


def bench(fn, args, repeat):
    t = timeit.repeat(lambda: fn(*args), number=1, repeat=repeat)
    return min(t), float(np.median(t))


def em_grid(backend_fn, n=3):
    """Time rwg_convolution on an n x n observation grid with the given kernel."""
    saved = em.kernels.inner_pieces
    em.kernels.inner_pieces = backend_fn
    try:
        pair = em.RwgPair.unit_square(1.0)
        pts = [em.ObservationPoint(x, y) for x in np.linspace(0.15, 0.85, n) for y in np.linspace(0.15, 0.85, n)]
        return min(timeit.repeat(lambda: [em.rwg_convolution(p, pair, "x") for p in pts], number=1, repeat=3))
    finally:
        em.kernels.inner_pieces = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernel not built; only the numpy backend is available", file=sys.stderr)
        return 1

    rows = make_rows(args.rows)
    ref = _kernels_py.inner_pieces(*rows)
    out = _kernels.inner_pieces(*rows)
    diff = max(float(np.max(np.abs(a - b) / (1 + np.abs(a)))) for a, b in zip(ref, out))

    results = []
    for name, fn in (("numpy", _kernels_py.inner_pieces), ("cython", _kernels.inner_pieces)):
        best, med = bench(fn, rows, args.repeat)
        results.append({"case": f"inner_pieces x{args.rows}", "backend": name, "best_s": best, "median_s": med})
    for name, fn in (("numpy", _kernels_py.inner_pieces), ("cython", _kernels.inner_pieces)):
        t = em_grid(fn)
        results.append({"case": "rwg_convolution 3x3", "backend": name, "best_s": t, "median_s": t})

    print(f"max scaled difference between backends: {diff:.2e}")
    print(f"{'case':<24}{'backend':<9}{'best [s]':>12}{'median [s]':>12}")
    for r in results:
        print(f"{r['case']:<24}{r['backend']:<9}{r['best_s']:>12.5f}{r['median_s']:>12.5f}")
    for case in dict.fromkeys(r["case"] for r in results):
        py, cy = (r["best_s"] for r in results if r["case"] == case)
        print(f"speed-up on {case}: {py / cy:.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(results[0]))
            w.writeheader()
            w.writerows(results)
    return 0


if __name__ == "__main__":
    sys.exit(main())
