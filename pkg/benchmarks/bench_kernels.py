"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py --repeat 5 --output bench.json
"""

import argparse
import json
import sys
import time

import numpy as np

from foveastream import GridSpec, generate_synthetic_trace, kernels
from foveastream._accel import NUMBA_AVAILABLE


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(n_samples, seed):
    grid = GridSpec(1920, 1080, 16)
    tr = generate_synthetic_trace("random_walk", n_samples / 90, 90, seed, grid)
    t = tr.timestamp_us.astype(np.float64)
    x, y, valid = tr.x_px, tr.y_px, tr.valid
    cx = (np.arange(120) + 0.5) * 16.0
    cy = (np.arange(68) + 0.5) * 16.0
    kx, ky = x[:500], y[:500]
    return {
        "offset_map": lambda k: lambda: k(120, 68, 60, 33, 10.0, 15.0),
        "moment_starts": lambda k: lambda: k(x, y, 120.0 * 120.0),
        "light_filter": lambda k: lambda: k(t, x, y, valid, 0.4, 700.0),
        "kde_grid": lambda k: lambda: k(cx, cy, kx, ky, 30.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=50_000, help="trace length for the trace kernels")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", help="write results as JSON")
    args = ap.parse_args(argv)

    results = []
    print(f"{'kernel':<15}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name, make in cases(args.samples, args.seed).items():
        row = {"kernel": name}
        row["numpy_s"] = _best(make(getattr(kernels, f"{name}_numpy")), args.repeat)
        if NUMBA_AVAILABLE:
            fn = make(getattr(kernels, f"{name}_numba"))
            fn()  # compile outside the timed region
            row["numba_s"] = _best(fn, args.repeat)
            row["speedup"] = row["numpy_s"] / row["numba_s"]
        results.append(row)
        nb = row.get("numba_s")
        print(
            f"{name:<15}{row['numpy_s']:>12.5f}"
            + (f"{nb:>12.5f}{row['speedup']:>9.1f}x" if nb is not None else f"{'n/a':>12}{'':>10}")
        )

    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump({"samples": args.samples, "repeat": args.repeat, "results": results}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
