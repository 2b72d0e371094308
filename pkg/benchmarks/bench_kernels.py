"""Time the compiled kernels against the pure-Python/NumPy fallback.

    python benchmarks/bench_kernels.py [--sizes 100 1000 10000] [--repeat 50]

Prints one line per (kernel, n) with the per-call time of each backend, the
speedup and the maximum absolute difference between the two outputs.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from volatil.kernels import available_backends, get_backend
from volatil.mixture import default_table


def _inputs(n, rng):
    table = default_table()
    resid = rng.normal(-1.27, 2.2, n)
    u = rng.random(n)
    phi, s2 = 0.95, 0.04
    diag = np.full(n + 1, (1 + phi * phi) / s2) + np.r_[0.0, 1.0 / rng.uniform(0.1, 7.0, n)]
    diag[0] = 1.0 / s2
    diag[-1] -= phi * phi / s2
    off = np.full(n, -phi / s2)
    cov = rng.normal(size=n + 1)
    z = rng.normal(size=n + 1)
    yt = rng.normal(0.0, 0.01, n)
    return {
        "sample_indicators": (resid, table.log_coef, table.means, table.inv_var, u),
        "tridiag_sample": (diag, off, cov, z),
        "garch_variance": (yt, 1e-6, 0.05, 0.9, 1e-4, 0.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", type=int, default=[100, 1000, 10000])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    names = available_backends()
    if "compiled" not in names:
        print("compiled extension not built; timing the python backend only")
    backends = {b: get_backend(b) for b in names}
    rng = np.random.default_rng(args.seed)
    header = f"{'kernel':<18}{'n':>7}" + "".join(f"{b + ' [us]':>16}" for b in names)
    if len(names) == 2:
        header += f"{'speedup':>10}{'max |diff|':>14}"
    print(header)
    for n in args.sizes:
        for kernel, call_args in _inputs(n, rng).items():
            times, outs = [], []
            for b in names:
                fn = getattr(backends[b], kernel)
                outs.append(np.asarray(fn(*call_args), dtype=float))
                t = min(timeit.repeat(lambda: fn(*call_args), number=args.repeat, repeat=3))
                times.append(t / args.repeat * 1e6)
            line = f"{kernel:<18}{n:>7}" + "".join(f"{t:>16.1f}" for t in times)
            if len(names) == 2:
                line += f"{times[1] / times[0]:>10.1f}{np.max(np.abs(outs[0] - outs[1])):>14.3g}"
            print(line)


if __name__ == "__main__":
    main()
