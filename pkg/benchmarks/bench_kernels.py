"""Timing comparison of the jitted and pure-numpy kernel backends.

Run as a script:  python3 benchmarks/bench_kernels.py [--rows 200000]

The two backends are bitwise-identical by construction (same operation
order), so this only reports speed.  The first jitted call includes
compilation unless the on-disk cache is warm; a warmup call is timed
separately.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nilcone.bch import get_group
from nilcone.coupling import builtin_coupling, coupling_kernels
from nilcone.kernels import available_backends, bch_batch, law_table, reduce_batch


def _time(fn, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_group(name: str, rows: int) -> list[tuple]:
    grp = get_group(name)
    tab = law_table(grp.law_group)
    rng = np.random.default_rng(7)
    x = rng.uniform(-2.0, 2.0, (rows, grp.dim))
    y = rng.uniform(-2.0, 2.0, (rows, grp.dim))
    out = []
    for backend in available_backends():
        bch_batch(tab, x[:16], y[:16], backend=backend)  # warm compile
        t = _time(lambda: bch_batch(tab, x, y, backend=backend))
        out.append((name, "bch_batch", backend, rows, t))
    cp_name = {"heisenberg3": "heisenberg-identity"}.get(name)
    if cp_name:
        ck = coupling_kernels(builtin_coupling(cp_name))
        omega = rng.uniform(-8.0, 8.0, (rows, grp.dim))
        for backend in available_backends():
            reduce_batch(ck.table, ck.lambda_logs, ck.lambda_leads,
                         omega[:16], backend=backend)
            t = _time(lambda: reduce_batch(ck.table, ck.lambda_logs,
                                           ck.lambda_leads, omega,
                                           backend=backend))
            out.append((name, "reduce_batch", backend, rows, t))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--groups", default="heisenberg3,engel4,free_nilpotent_2_3")
    args = ap.parse_args()

    rows = []
    for name in args.groups.split(","):
        rows.extend(bench_group(name.strip(), args.rows))

    print(f"{'group':<20} {'kernel':<14} {'backend':<8} {'rows':>9} {'best_s':>10} {'Mrows/s':>9}")
    base: dict[tuple, float] = {}
    for name, kernel, backend, n, t in rows:
        base.setdefault((name, kernel), t)
        rate = n / t / 1e6
        print(f"{name:<20} {kernel:<14} {backend:<8} {n:>9} {t:>10.4f} {rate:>9.2f}")
    print()
    for (name, kernel) in base:
        times = {b: t for nm, k, b, n, t in rows if (nm, k) == (name, kernel)}
        if {"numba", "numpy"} <= times.keys():
            ratio = times["numpy"] / times["numba"]
            print(f"{name}/{kernel}: numba speedup {ratio:.2f}x over numpy")


if __name__ == "__main__":
    main()
