"""Time the hot kernels on both backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--paths 20000]

Prints one line per kernel with the best wall time of each backend and the
speed-up of the compiled one.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from interlace_lab import kernels, links, multilevel


def _inputs(paths: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(np.sort(rng.uniform(-3, 3, (paths, 4)), axis=1))
    dw = np.ascontiguousarray(0.03 * rng.standard_normal(x.shape))
    levels = links.gt_uniform_sample(x, rng)
    flat = multilevel.flatten_levels(levels)
    dwf = np.ascontiguousarray(0.03 * rng.standard_normal(flat.shape))
    exps = rng.standard_exponential(200_000)
    unifs = rng.uniform(size=200_000)
    return x, dw, flat, dwf, exps, unifs


def cases(backend, paths: int):
    x, dw, flat, dwf, exps, unifs = _inputs(paths)
    prm = np.array([-6.0, 0.0])
    lin = np.array([0.0, -2.0, -4.0, -6.0])
    const = np.zeros(4)
    pb_prm = np.array([0.5, 0.5, 0.5, 0.5])
    start = np.array([40, 39, 41, 38, 40, 42], dtype=np.int64)

    def pushblock():
        backend.pushblock_run(start.copy(), 3, pb_prm, 0.0, 1e9, exps, unifs)

    return {
        "euler_try (hp, N=4)": lambda: backend.euler_try(x, dw, 1e-3, kernels.KIND_HP, prm, 10.0, 0.0, 0.1),
        "reflected_step (depth 4)": lambda: backend.reflected_step(flat, dwf, 1e-3, 4, lin, const, 1e-12, 1),
        "pushblock_run (200k events)": pushblock,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--paths", type=int, default=20_000)
    args = ap.parse_args(argv)
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        cy = None
        print("compiled kernels not built; timing the python backend only")
    py_cases = cases(py, args.paths)
    cy_cases = cases(cy, args.paths) if cy is not None else {}
    print(f"{'kernel':32s} {'python [s]':>12s} {'cython [s]':>12s} {'speed-up':>9s}")
    for name, fn in py_cases.items():
        tp = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        if name in cy_cases:
            tc = min(timeit.repeat(cy_cases[name], number=1, repeat=args.repeat))
            print(f"{name:32s} {tp:12.4f} {tc:12.4f} {tp / tc:8.1f}x")
        else:
            print(f"{name:32s} {tp:12.4f} {'-':>12s} {'-':>9s}")


if __name__ == "__main__":
    main()
