#!/usr/bin/env python3
"""Grid ascent lower bounds across resolutions.

On the plain square the (2,2) quotient converges to 1/pi from below.
On a beta-version with p below the threshold the test-function-seeded
quotient keeps climbing as h shrinks, which is the numerical face of
an inequality that fails.  Random restarts are disabled here: they
find a larger smooth mode whose coarse-grid value is biased high, so
the max over starts is not resolution-monotone.
"""

import argparse
import time
import warnings

from qhlab.domains import (
    build_beta_version,
    build_disk_minus_fractal,
    build_unit_square,
)
from qhlab.poincare import discrete_poincare_lower_bound, threshold_p0
from qhlab.whitney import whitney_decompose


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta", type=float, default=0.25)
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ap.add_argument("--q", type=float, default=1.0)
    ap.add_argument("--iters", type=int, default=60)
    args = ap.parse_args()

    square = build_unit_square()
    for k in (5, 6, 7):
        h = 2.0 ** -k
        t0 = time.time()
        res = discrete_poincare_lower_bound(square, 2.0, 2.0, h,
                                            iters=args.iters, restarts=0)
        print("square  h=1/%-4d  (2,2) bound=%.6f  [%.1fs]"
              % (2 ** k, res.value, time.time() - t0))
    print("  reference 1/pi = 0.318310")

    base = build_disk_minus_fractal(args.lam, 6)
    oracle = build_beta_version(base, whitney_decompose(base, 4), args.beta)
    p = 0.9 * threshold_p0(args.q, args.lam, args.beta)
    print("G_beta  q=%g p=%.4f (0.9 p0)" % (args.q, p))
    for k in (6, 7, 8):
        h = 2.0 ** -k
        t0 = time.time()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = discrete_poincare_lower_bound(oracle, args.q, p, h,
                                                iters=args.iters, restarts=0)
        print("G_beta  h=1/%-4d  bound=%.4f  [%.1fs]"
              % (2 ** k, res.value, time.time() - t0))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
