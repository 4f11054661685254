"""Wall-clock comparison of the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Each kernel is timed on problem sizes typical of the solvers; the numba
timings exclude the first (compiling) call. Outputs are checked to agree.
"""
import argparse
import csv
import sys
import time

import numpy as np

from onsetfbp import _kernels


def _time(fn, repeat):
    fn()  # warm-up, also triggers compilation
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def cases(rng):
    for batch, m in ((64, 32), (1024, 64), (4096, 128)):
        lo = rng.uniform(-1, 0, m - 1)
        up = rng.uniform(-1, 0, m - 1)
        di = 2.5 + rng.random((batch, m))
        rhs = rng.standard_normal((batch, m)) + 1j * rng.standard_normal((batch, m))
        yield "thomas", f"{batch}x{m}", lambda b, a=(lo, di, up, rhs): _kernels.thomas_batched(*a, backend=b)
    for n, width in ((50, 64), (200, 256), (400, 1024)):
        t = np.sort(rng.uniform(0.01, 1, n))
        v = rng.standard_normal((n, width))
        yield "holder_pairs", f"{n}x{width}", lambda b, a=(v, t): _kernels.holder_pairs(*a, 0.5, backend=b)
    for modes, pts in ((32, 32), (128, 512), (256, 4096)):
        k = np.fft.fftfreq(modes, 1 / modes)[:, None]
        coef = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
        x = rng.uniform(0, 2 * np.pi, (pts, 1))
        yield "fourier_eval", f"{modes}x{pts}", lambda b, a=(coef, k, x): _kernels.fourier_eval(*a, backend=b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", default=None, help="also write the table as CSV")
    args = ap.parse_args(argv)
    if not _kernels.USE_NUMBA:
        print("numba backend disabled (ONSETFBP_NUMPY set or numba missing); nothing to compare")
        return 1
    rows = []
    for name, size, fn in cases(np.random.default_rng(0)):
        diff = float(np.max(np.abs(np.asarray(fn("numba")) - np.asarray(fn("numpy")))))
        t_nb, t_np = _time(lambda: fn("numba"), args.repeat), _time(lambda: fn("numpy"), args.repeat)
        rows.append((name, size, t_nb, t_np, t_np / t_nb, diff))
    print(f"{'kernel':<14}{'size':>12}{'numba [ms]':>13}{'numpy [ms]':>13}{'speedup':>9}{'max diff':>11}")
    for name, size, a, b, s, d in rows:
        print(f"{name:<14}{size:>12}{1e3 * a:>13.3f}{1e3 * b:>13.3f}{s:>9.1f}{d:>11.1e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", "size", "numba_s", "numpy_s", "speedup", "max_abs_diff"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
