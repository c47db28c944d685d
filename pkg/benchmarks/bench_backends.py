"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_backends.py [--repeat 5]

Both paths run in one process (the env flag only picks the default), and
their outputs are compared so a speedup never hides a discrepancy.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from star_spectra import specfun
from star_spectra._backend import HAVE_NUMBA
from star_spectra.bs_operator import PLAN_CACHE, edge_chords, evaluate_plan, kappa_bucket
from star_spectra.geometry import StarGraph
from star_spectra.quadrature import default_rule


def best_of(fn, repeat):
    fn()  # warm-up / compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_bessel(repeat):
    z = np.geomspace(1e-6, 50.0, 200_000)

    def nb():
        k0 = np.empty_like(z)
        k1 = np.empty_like(z)
        specfun._k0k1_numba(z, k0, k1)
        return k0, k1

    def npy():
        return specfun._k0k1_numpy(z)

    diff = max(float(np.max(np.abs(a - b) / b)) for a, b in zip(nb(), npy()))
    return "K0/K1 on 2e5 points", best_of(nb, repeat), best_of(npy, repeat), diff


def bench_blocks(repeat, panels):
    g = StarGraph(4, 1.0, (0.9, 1.4, 1.7, 2.283185307179586))
    rule = default_rule(1.0, num_panels=panels)
    kappa = 3.0
    plans = [PLAN_CACHE.get(float(x), rule, kappa_bucket(kappa)) for x in np.unique(edge_chords(g))]

    def run(flag):
        return [evaluate_plan(p, kappa, rule, use_numba=flag) for p in plans]

    diff = max(float(np.max(np.abs(a - b))) / float(np.max(np.abs(b))) for a, b in zip(run(True), run(False)))
    label = "block evaluation, N=4, %d nodes/edge" % rule.size
    return label, best_of(lambda: run(True), repeat), best_of(lambda: run(False), repeat), diff


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = [bench_bessel(args.repeat)] + [bench_blocks(args.repeat, P) for P in (8, 16, 32)]
    print("%-40s %12s %12s %8s %10s" % ("kernel", "numba [s]", "numpy [s]", "speedup", "max diff"))
    for label, tn, tp, diff in rows:
        print("%-40s %12.5f %12.5f %8.1f %10.1e" % (label, tn, tp, tp / tn, diff))


if __name__ == "__main__":
    main()
