"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Each kernel runs on inputs sized like one Monte Carlo trial. The best of
``--repeat`` wall-clock timings is reported next to the largest deviation
between backends.
"""

from __future__ import annotations

import argparse
import csv
import sys
import timeit

import numpy as np

from delone_lab import kernels


def _cases(rng):
    # 1D potential: L = 80, h = 1/80 -> 6399 nodes, 160 bump centres.
    origin1 = np.array([-40.0 + 0.0125])
    c1 = rng.uniform(-40, 40, size=(160, 1))
    w1 = (rng.random(160) > 0.5).astype(float)
    # 2D potential: L = 12, h = 1/40 -> 479^2 nodes, 144 centres.
    origin2 = np.array([-6.0 + 0.025, -6.0 + 0.025])
    c2 = rng.uniform(-6, 6, size=(144, 2))
    w2 = np.ones(144)
    X = rng.uniform(-20, 20, size=(3000, 2))
    Y = X + rng.normal(scale=0.05, size=X.shape)
    Xs, Ys = X[:200], Y[:200]
    D = np.sort(rng.integers(-200, 200, size=600).astype(float))[:, None]
    D = np.unique(D, axis=0)
    pattern = D[np.abs(D[:, 0]) < 2.5]
    cands = (D - pattern[0])
    return {
        "bump_sum_1d": lambda impl: kernels.bump_sum(origin1, 0.0125, (6399,), c1, w1, 0.5, 0.06, 0.1, 0, impl=impl),
        "bump_sum_2d": lambda impl: kernels.bump_sum(origin2, 0.025, (479, 479), c2, w2, 0.5, 0.2, 0.4, 1, impl=impl),
        "hausdorff_200": lambda impl: kernels.directed_hausdorff(Xs, Ys, impl=impl),
        "hausdorff_3000": lambda impl: kernels.directed_hausdorff(X, Y, impl=impl),
        "pattern_matches": lambda impl: kernels.pattern_matches(
            D, pattern, cands, np.array([-2.5]), np.array([2.5]), 1e-9, impl=impl),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="write results to this CSV file")
    args = ap.parse_args(argv)

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled backend unavailable; timing the Python fallback only", file=sys.stderr)
    rows = []
    for name, fn in _cases(np.random.default_rng(args.seed)).items():
        results, times = {}, {}
        for label, impl in impls.items():
            results[label] = np.asarray(fn(impl), dtype=float)
            times[label] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        dev = 0.0
        if len(results) == 2:
            a, b = results.values()
            dev = float(np.max(np.abs(a - b))) if a.size else 0.0
        row = {"kernel": name, **{f"{k}_s": v for k, v in times.items()}, "max_abs_diff": dev}
        if len(times) == 2:
            row["speedup"] = times["python"] / times["cython"]
        rows.append(row)

    fields = list(rows[0].keys())
    print("  ".join(f"{f:>18}" for f in fields))
    for r in rows:
        print("  ".join(f"{r[f]:>18.6g}" if isinstance(r[f], float) else f"{r[f]:>18}" for f in fields))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
