#!/usr/bin/env python3
"""Counterexample growth on the beta-version of B(0,2) \\ K_lambda.

Builds G_beta over the four-corner complement, plans one room per
selected Whitney cube, and tracks the ratio A_m / B_m of q-norm to
p-gradient-norm for p on both sides of the threshold.  Below p0 the
ratio grows like m^(1/q - 1/p); above p0 it collapses.
"""

import argparse
import warnings

from qhlab.domains import build_beta_version, build_disk_minus_fractal
from qhlab.poincare import (
    build_counterexample_plan,
    counterexample_sequence,
    save_ratio_sequence_csv,
    threshold_p0,
)
from qhlab.whitney import whitney_decompose


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=0.25)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--j-max", type=int, default=8)
    ap.add_argument("--q", type=float, default=1.0)
    ap.add_argument("--m-max", type=int, default=64)
    ap.add_argument("--out", default="out/ratio_sequence.csv")
    args = ap.parse_args()

    base = build_disk_minus_fractal(args.lam, args.depth)
    surgery = whitney_decompose(base, 4)
    oracle = build_beta_version(base, surgery, args.beta)
    W = whitney_decompose(oracle, args.j_max)
    print("G_beta: %d cubes at J_max=%d" % (W.n_cubes, args.j_max))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = build_counterexample_plan(W, args.lam, args.m_max,
                                         extrapolate=True)
    print("plan: k0=%d depth=%d (measured up to %s)"
          % (plan.k0, plan.depth, plan.extrapolated_from))

    p0 = threshold_p0(args.q, args.lam, args.beta)
    for factor in (0.9, 1.25):
        p = factor * p0
        if not args.q < p:
            print("p=%.4f skipped (needs q < p)" % p)
            continue
        seq = counterexample_sequence(plan, args.beta, args.q, p)
        lo = min(4, plan.depth)
        slope = seq.fitted_slope(lo)
        target = 1.0 / args.q - 1.0 / p
        print("p=%.4f (%.2f p0): slope=%.3f  reference 1/q-1/p=%.3f"
              % (p, factor, slope, target))
        if factor < 1:
            save_ratio_sequence_csv(seq, args.out)
            print("wrote %s" % args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
