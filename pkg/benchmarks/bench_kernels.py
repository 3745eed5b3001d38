"""Time the compiled kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--threads N]
"""

import argparse
import math
import time

import numpy as np

from dilutebose import _pykernels

try:
    from dilutebose import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(threads):
    r = np.linspace(0.0, 1.0, 4097)
    wg = np.exp(-r) * r * r
    t = np.linspace(0.0, 400.0, 20000)
    yield ("radial_transform 20000x4097", lambda m: m.radial_transform(t, r, wg, threads))
    om = np.array([1.0, 0.5, 2 * math.pi * 0.25])
    yield ("cube_shell_sums M=96", lambda m: m.cube_shell_sums(96, om, threads))
    ax = np.arange(-6, 7)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3).astype(np.int64)
    g = g[np.einsum("ij,ij->i", g, g) <= 36]
    b = np.cos(np.arange(g.shape[0], dtype=np.float64))
    table = 1.0 / (1.0 + np.arange(4 * 36 + 1, dtype=np.float64))
    yield (f"table_matvec {g.shape[0]}x{g.shape[0]}", lambda m: m.table_matvec(g, g, b, table, threads))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; only the fallback is timed")
    print(f"{'kernel':34s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, call in cases(args.threads):
        tp, yp = _time(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:34s} {tp:11.4f} {'-':>13s} {'-':>8s} {'-':>13s}")
            continue
        tc, yc = _time(lambda: call(_ckernels), args.repeat)
        yp, yc = np.asarray(yp), np.asarray(yc)
        diff = float(np.max(np.abs(yp - yc)) / max(np.max(np.abs(yp)), 1e-300))
        print(f"{name:34s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
