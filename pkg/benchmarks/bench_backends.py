"""Time the compiled and pure-Python EnKBF kernels on identical inputs.

    python3 benchmarks/bench_backends.py [--steps 200] [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from enkbf_dp._backend import available
from enkbf_dp.seqmodel import rng_stream
from enkbf_dp.spectral import eigenpairs

CASES = [(512, 10), (512, 100), (2048, 10)]  # (J, D)


def _inputs(J, D):
    rng = rng_stream(0, "bench", J, D)
    basis = eigenpairs(D)
    particles = rng.standard_normal((J, D)) * np.arange(1, D + 1) ** -2.5
    y = basis.kappa * np.arange(1, D + 1) ** -2.5 + rng.standard_normal(D) / 100
    return particles, np.ascontiguousarray(basis.kappa), y


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available()
    print(f"{'J':>6} {'D':>5} " + " ".join(f"{name:>12}" for name in backends) + "   speedup  max|diff|")
    for J, D in CASES:
        p0, kappa, y = _inputs(J, D)
        times, finals = {}, {}
        for name, mod in backends.items():
            def job():
                p = p0.copy()
                path = np.empty(args.steps + 1)
                mod.advance(p, kappa, y, 1e-4, 1e-3, args.steps, args.steps, -np.inf, path)
                return p
            finals[name] = job()
            times[name] = min(timeit.repeat(job, number=1, repeat=args.repeat)) / args.steps
        cols = " ".join(f"{1e6 * times[n]:>9.1f} us" for n in backends)
        if "compiled" in times:
            speed = times["python"] / times["compiled"]
            diff = float(np.max(np.abs(finals["python"] - finals["compiled"])))
            print(f"{J:>6} {D:>5} {cols} {speed:>8.2f}x  {diff:.1e}")
        else:
            print(f"{J:>6} {D:>5} {cols}   (compiled backend not built)")


if __name__ == "__main__":
    main()
