"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from certcal import _kernels_py

try:
    from certcal import _kernels_c
except ImportError:
    _kernels_c = None

CASES = [
    ("binomial_tail n0=1000", lambda k: k.binomial_tail(1000, 0.05)),
    ("binomial_tail n0=10000", lambda k: k.binomial_tail(10000, 0.05)),
    ("binomial_tail n0=100000", lambda k: k.binomial_tail(100000, 0.05)),
    ("counter_uniforms n=10^4", lambda k, i=np.arange(10**4, dtype=np.int64): k.counter_uniforms(7, i)),
    ("counter_uniforms n=10^6", lambda k, i=np.arange(10**6, dtype=np.int64): k.counter_uniforms(7, i)),
]


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels_c is None:
        print("compiled kernels not built; only the pure-Python timings are shown")
    print(f"{'case':<28}{'python':>14}{'cython':>14}{'speedup':>10}")
    for name, fn in CASES:
        tp = best_of(lambda: fn(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:<28}{tp * 1e3:>12.3f}ms")
            continue
        assert np.array_equal(fn(_kernels_py), fn(_kernels_c)), name
        tc = best_of(lambda: fn(_kernels_c), args.repeat)
        print(f"{name:<28}{tp * 1e3:>12.3f}ms{tc * 1e3:>12.3f}ms{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
