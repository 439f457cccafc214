"""Calibrate the constants of the periodic-orbit estimate suite.

Every estimate is evaluated with unit constants on a set of tuned orbits;
the largest ratio ``value / bound`` is the smallest constant that works on
the sample.  The suggestion is twice that, rounded up to a power of two.
"""

import argparse
import math
import warnings

from rp4bp.core_model import SystemParams
from rp4bp.periodic import (BOUND_CONSTANTS, assemble_orbit, fixed_point_bounds,
                            orbit_estimates, tune_epsilon)

# estimate name -> constant it calibrates
KEYS = {"period": "K_period", "ratio": "K_ratio", "r": "K_radius", "R": "K_radius",
        "theta_dot": "K_radius", "q2": "K_q2", "p2": "K_p2", "fixed_rh": "M3",
        "fixed_Rh": "M3", "fixed_rho": "M1", "fixed_Ups": "M1", "fixed_G": "M1"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=int, nargs="+", default=[326, 1000])
    ap.add_argument("--delta", type=float, nargs="+", default=[1e-12, 1e-10, 1e-9])
    ap.add_argument("--mu", type=float, default=0.5)
    args = ap.parse_args(argv)
    unit = {k: 1.0 for k in BOUND_CONSTANTS}
    worst = {}
    for q in args.q:
        for d in args.delta:
            for branch in (1, -1):
                p = SystemParams(mu=args.mu, delta=d, epsilon=0.1, q=q)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    tr = tune_epsilon(p, branch, q=q)
                    rec = assemble_orbit(p.replace(epsilon=tr.epsilon), tr.fixed_point)
                fp = tr.fixed_point
                fp.bounds = fixed_point_bounds(rec.params, fp.point, fp.section.G, fp.E, unit)
                est = orbit_estimates(rec, fp, unit, floor=0.0)
                for name, (val, bound, _) in est.items():
                    if bound > 0:
                        c = KEYS[name]
                        worst[c] = max(worst.get(c, 0.0), val / bound)
                print(f"q={q} delta={d:.0e} branch={branch:+d} done", flush=True)
    print(f"{'constant':10s} {'sample max':>12s} {'suggested':>10s} {'in use':>8s}")
    for c in sorted(worst):
        sug = 2.0 ** math.ceil(math.log2(max(2.0 * worst[c], 1e-300)))
        print(f"{c:10s} {worst[c]:12.3e} {sug:10.3g} {BOUND_CONSTANTS[c]:8.3g}")


if __name__ == "__main__":
    main()
