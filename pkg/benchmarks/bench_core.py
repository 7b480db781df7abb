"""Compiled core vs numpy fallback on the three hot kernels.

    python benchmarks/bench_core.py [--repeat 5] [--csv out.csv]

Each case is timed with both backends on identical inputs; the best of
``--repeat`` runs is reported together with the speed-up.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from dpplab import backend
from dpplab.numerics import RngStream
from dpplab.samplers import sample_dpp
from dpplab.spectral import GinibreDiskBasis


def case_eval(R):
    b = GinibreDiskBasis(R)
    g = RngStream(1).generator
    idx = np.sort(g.choice(len(b), size=min(len(b), int(R * R)), replace=False))
    z = b.window.sample_uniform(g, 256)
    return "ginibre_eval R=%g (%d modes x 256 pts)" % (R, idx.size), lambda: b.evaluate(idx, z)


def case_sample(R):
    b = GinibreDiskBasis(R)
    return "sample_dpp R=%g (~%d points)" % (R, R * R), lambda: sample_dpp(b, RngStream(2))


def case_nn(n):
    g = RngStream(3).generator
    r = np.sqrt(n / 1.0)
    z = r * (g.random(n) - 0.5) + 1j * r * (g.random(n) - 0.5)
    return "nn_dist2 (%d points)" % n, lambda: backend.nn_dist2(z)


CASES = [lambda: case_eval(10.0), lambda: case_eval(30.0), lambda: case_sample(10.0),
         lambda: case_sample(20.0), lambda: case_nn(2000), lambda: case_nn(50000)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    names = backend.available()
    if "cython" not in names:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
    rows = []
    for make in CASES:
        label, fn = make()
        times = {}
        for name in names:
            old = backend.use(name)
            try:
                fn()  # warm caches
                times[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            finally:
                backend.use(old)
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        rows.append((label, times.get("cython", float("nan")), times["python"], speed))
        print("%-42s cython %9.4f s  python %9.4f s  x%.1f" % rows[-1], flush=True)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "cython_s", "python_s", "speedup"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
