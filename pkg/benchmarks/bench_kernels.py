"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py``; prints microseconds per
call and the speed-up, and checks that both versions agree.
"""

import argparse
import timeit

import numpy as np

from rp4bp import _kernels_py as pure

try:
    from rp4bp import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def cases(rng):
    z6 = np.array([1e-3, -2e-3, 1.01, 1e-3, 0.4, 1.0])
    z5 = np.array([0.3, 0.1, 0.7, 2.0, 0.2])
    xi = rng.uniform(2.0, 100.0, 1000)
    ang = rng.uniform(0.0, 2.0 * np.pi, 1000)
    return {
        "comet_rhs": lambda m: m.comet_rhs(z6, 0.5, 0.1, 1e-10, False),
        "mcgehee_rhs_circular": lambda m: m.mcgehee_rhs_circular(z5, 0.3, 1e-3, 1000),
        "increment_potential[1000]": lambda m: m.increment_potential(xi, ang, 0.3),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--number", type=int, default=2000)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python us':>10s} {'compiled us':>12s} {'speed-up':>9s} {'max diff':>9s}")
    for name, call in cases(rng).items():
        t_py = timeit.timeit(lambda: call(pure), number=args.number) / args.number * 1e6
        if compiled is None:
            print(f"{name:28s} {t_py:10.2f} {'n/a':>12s}")
            continue
        t_c = timeit.timeit(lambda: call(compiled), number=args.number) / args.number * 1e6
        diff = float(np.max(np.abs(np.asarray(call(pure)) - np.asarray(call(compiled)))))
        print(f"{name:28s} {t_py:10.2f} {t_c:12.2f} {t_py / t_c:9.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
