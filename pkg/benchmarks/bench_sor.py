"""Time the SOR kernels: numba vs pure numpy, single and multi-worker.

    python benchmarks/bench_sor.py [--width 240 --height 180 --iters 100 --repeat 5]

The first numba call compiles (or loads the on-disk cache) and is excluded.
"""
import argparse
import timeit

import numpy as np

from gradevents import ReconstructionParams, sor_solve
from gradevents import _kernels
from gradevents.reconstruct import LaplacianField


def measure(fn, repeat):
    fn()  # warm-up / JIT
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=240)
    ap.add_argument("--height", type=int, default=180)
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4])
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    lap = LaplacianField(rng.normal(0, 0.02, (args.height, args.width)))
    params = ReconstructionParams(iterations=args.iters)

    print(f"grid {args.width}x{args.height}, {args.iters} iterations, best of {args.repeat}")
    results = {}
    for name in _kernels.available():
        for w in args.workers:
            t = measure(lambda: sor_solve(lap, params, workers=w, backend=name), args.repeat)
            results[name, w] = t
            print(f"  {name:6s} workers={w}: {t * 1e3:9.2f} ms")
    ref = sor_solve(lap, params, backend="numpy")
    same = all(np.array_equal(sor_solve(lap, params, workers=w, backend=n), ref) for n, w in results)
    print(f"all variants bit-identical: {same}")
    if ("numba", 1) in results:
        print(f"numba speed-up (1 worker): {results['numpy', 1] / results['numba', 1]:.1f}x")


if __name__ == "__main__":
    main()
