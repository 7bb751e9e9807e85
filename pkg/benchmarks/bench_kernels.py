#!/usr/bin/env python3
"""Time the state-vector kernels on each backend at three-qudit size.

Each kernel is applied to a random 20**3 state on every site (or every
nearest-neighbour pair), the way one Trotter step uses it, and the median
over repeats is reported. The first
call of every numba kernel is made before timing so compilation is not
counted.

Usage:
  python3 benchmarks/bench_kernels.py [--dim 20] [--sites 3] [--repeat 50]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from quditphi4 import _kernels


def timed(fn, repeat):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def workloads(mod, psi, u, diag, table, dim, sites):
    def dense():
        for j in range(sites):
            mod.apply_dense(psi, u, dim, j)

    def diagonal():
        for j in range(sites):
            mod.apply_diag(psi, diag, dim, j)

    def pair():
        for j in range(sites - 1):
            mod.apply_pair_diag(psi, table, dim, j, j + 1)

    def marg():
        for j in range(sites):
            mod.marginal(psi, dim, j)

    pairs = np.array([(j, j + 1) for j in range(sites - 1)], dtype=np.int64).reshape(-1, 2)

    def sweep():
        mod.apply_all_sites(psi, u, dim, sites)

    def chain():
        mod.apply_chain_diag(psi, table, dim, pairs)

    return {
        "apply_dense": dense,
        "apply_diag": diagonal,
        "apply_pair_diag": pair,
        "marginal": marg,
        "apply_all_sites": sweep,
        "apply_chain_diag": chain,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--sites", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    dim, sites = args.dim, args.sites

    rng = np.random.default_rng(0)
    psi = rng.normal(size=dim**sites) + 1j * rng.normal(size=dim**sites)
    psi /= np.linalg.norm(psi)
    u, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    diag = np.exp(1j * rng.uniform(0, 2 * np.pi, dim))
    table = np.exp(1j * rng.uniform(0, 2 * np.pi, (dim, dim)))

    results = {}
    for name in _kernels.available_backends():
        mod = _kernels.get_backend(name)
        jobs = workloads(mod, psi, u, diag, table, dim, sites)
        for fn in jobs.values():
            fn()  # warm-up / JIT
        results[name] = {k: timed(fn, args.repeat) for k, fn in jobs.items()}

    names = list(results)
    print(f"state size {dim}**{sites} = {dim ** sites}, median of {args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{n:>14}" for n in names)
          + ("   numpy/numba" if len(names) == 2 else ""))
    for k in results[names[0]]:
        row = f"{k:<18}" + "".join(f"{results[n][k] * 1e6:>11.1f} us" for n in names)
        if len(names) == 2:
            row += f"   {results['numpy'][k] / results['numba'][k]:>10.2f}x"
        print(row)


if __name__ == "__main__":
    main()
