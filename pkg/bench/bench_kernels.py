"""Time the compiled kernels against the numpy/pure-Python fallback.

Usage: python3 bench/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from glam import _kernels_py

try:
    from glam import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases(rng):
    n = 20_000
    lam = np.column_stack([rng.normal(size=n), rng.uniform(0.5, 2.0, n),
                           rng.uniform(-0.25, 1.0, n), rng.uniform(-0.25, 1.0, n)])
    y = rng.normal(size=n) * 2.0
    m = 200
    s0 = np.full(m, 1500)
    i0 = np.full(m, 50)
    u = rng.random((m, 2 * (2 * 1500 + 50) + 2))
    return {
        "invert_logit (20k points)": lambda k: k.invert_logit(y, lam),
        "loglik_terms (20k points)": lambda k: k.loglik_terms(y, lam, 1e3),
        "sir_batch (200 runs)": lambda k: k.sir_batch(s0, i0, 2000.0, 0.5, 0.5, u),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<28}{'python [ms]':>14}{'compiled [ms]':>16}{'speed-up':>10}")
    for name, call in cases.items():
        t_py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat))
        if _compiled is None:
            print(f"{name:<28}{1e3 * t_py:>14.2f}{'n/a':>16}{'':>10}")
            continue
        t_c = min(timeit.repeat(lambda: call(_compiled), number=1, repeat=args.repeat))
        print(f"{name:<28}{1e3 * t_py:>14.2f}{1e3 * t_c:>16.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
