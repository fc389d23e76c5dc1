"""Compare the compiled and pure-Python kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``. Prints the best of
several repeats per kernel and backend, plus the speedup.
"""
import argparse
import timeit

import numpy as np

from mdpturnpike.kernels import available_backends


def _cases(rng):
    N, M = 4, 6
    p = rng.random((N, M))
    p /= p.sum(axis=1, keepdims=True)
    R = rng.random(N) * 3
    Mg, Ng = 40, 8
    r = rng.random((Mg, Ng))
    P = rng.random((Ng, Mg, Mg))
    P /= P.sum(axis=2, keepdims=True)
    W = rng.random(Mg)
    rows = rng.random((600, 12))
    rows /= rows.sum(axis=1, keepdims=True)
    return {
        "walk_forward (i_max=20000)": lambda k: k.walk_forward(p, R, 20_000, 1e-9),
        "gs_sweep (M=40, N=8)": lambda k: k.gs_sweep(r, P, 0.95, W, 1e-9),
        "min_row_overlap (600 rows)": lambda k: k.min_row_overlap(rows),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    backends = available_backends()
    cases = _cases(np.random.default_rng(args.seed))
    print(f"backends: {', '.join(backends)}")
    for name, fn in cases.items():
        times = {}
        for bname, mod in backends.items():
            number = 1 if bname == "python" else 5
            t = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times[bname] = t
        line = "  ".join(f"{b}={t * 1e3:9.3f} ms" for b, t in times.items())
        if "cython" in times and "python" in times:
            line += f"  speedup={times['python'] / times['cython']:7.1f}x"
        print(f"{name:30s} {line}")


if __name__ == "__main__":
    main()
