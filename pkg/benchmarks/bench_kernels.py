"""Compiled vs numpy kernel timings.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
import argparse
import json
import sys
import timeit

import numpy as np

from winowise import kernels


def _cases(rng):
    x = rng.integers(-128, 128, (1, 16, 34, 34)).astype(np.int64)
    w = rng.integers(-128, 128, (16, 16, 3, 3)).astype(np.int64)
    xf, wf = x.astype(np.float64), w.astype(np.float64)
    v = rng.integers(-2**20, 2**20, (4096, 36)).astype(np.int64)
    shifts = rng.integers(0, 12, 36).astype(np.int64)
    qx = rng.integers(-512, 512, (1, 64, 64, 36)).astype(np.int64)
    qw = rng.integers(-512, 512, (64, 64, 36)).astype(np.int64)
    vals = rng.normal(0, 1, 4096)
    scales = np.linspace(0.5, 8.0, 751) / 128
    return {
        "conv2d_direct int64 16x16x32x32": lambda k: k.conv2d_direct(x, w, 1),
        "conv2d_direct f64 16x16x32x32": lambda k: k.conv2d_direct(xf, wf, 1),
        "quantize_shift 4096x36": lambda k: k.quantize_shift(v, shifts, -512, 511),
        "tap_accumulate 64ch 64 tiles": lambda k: k.tap_accumulate(qx, qw),
        "rel_error_grid 4096 x 751": lambda k: k.rel_error_grid(vals, 0.0, scales, -128.0, 127.0),
    }


def run(repeat=5, seed=0):
    backends = kernels.available_backends()
    results = []
    for name, fn in _cases(np.random.default_rng(seed)).items():
        row = {"kernel": name}
        for label, mod in backends.items():
            fn(mod)  # warm-up
            row[label] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=repeat))
        if "cython" in row:
            row["speedup"] = row["python"] / row["cython"]
        results.append(row)
    return results


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="write results here")
    args = p.parse_args(argv)
    results = run(args.repeat, args.seed)
    if "cython" not in kernels.available_backends():
        print("compiled kernels not built; timing the numpy fallback only", file=sys.stderr)
    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for r in results:
        cy = f"{1e3 * r['cython']:12.2f}" if "cython" in r else f"{'-':>12s}"
        sp = f"{r['speedup']:8.1f}" if "speedup" in r else f"{'-':>8s}"
        print(f"{r['kernel']:34s} {1e3 * r['python']:12.2f} {cy} {sp}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
