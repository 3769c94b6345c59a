"""Compare the numba and numpy variants of every hot kernel.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call (compilation, or loading from the on-disk cache) is
excluded from the timings. Set LIPGO_NO_NUMBA=1 to make the library itself
use the numpy path; this script always times both.
"""

import argparse
import time

import numpy as np

from lipgo import kernels
from lipgo._accel import NUMBA_AVAILABLE
from lipgo.gkls import generate_function, preset_spec


def _best_of(fn, args, repeat):
    fn(*args)  # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    pts = rng.random((2000, 3))
    vals = rng.random(2000)
    q = rng.random((5000, 3))
    yield "cone_minorant 2000x5000 N=3", "cone_minorant", (pts, vals, 2.5, q)

    d = np.round(rng.random(20000) * 40) / 40 + 0.01
    f = rng.random(20000)
    yield "hull_select 20000 cells", "hull_select", (d, f, 0.1)

    fn = generate_function(preset_spec(3, "hard"), 1)
    x = fn.domain.lower + rng.random((50000, 3)) * fn.domain.widths
    yield "gkls_values 50000 pts N=3", "gkls_values", (x, *fn._args())
    yield "gkls_gradients 50000 pts N=3", "gkls_gradients", (x, *fn._args())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba not installed; the numba column times the uncompiled loops")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<32} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8}")
    for label, name, call_args in cases(rng):
        a = getattr(kernels, name + "_numba")
        b = getattr(kernels, name + "_numpy")
        ra, rb = a(*call_args), b(*call_args)
        if not np.allclose(ra, rb, rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        ta, tb = _best_of(a, call_args, args.repeat), _best_of(b, call_args, args.repeat)
        print(f"{label:<32} {1e3 * ta:>11.3f} {1e3 * tb:>11.3f} {tb / ta:>7.1f}x")


if __name__ == "__main__":
    main()
