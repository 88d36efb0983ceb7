#!/usr/bin/env python3
"""Full pipeline on the unit square and its beta-version.

The square is the sanity fixture: dimension estimates sit at 1, the
chain tree certifies a John-style core, and the predicate lands on the
supported side for every p above the threshold.  The beta-version run
next to it shows the same reports after room-and-passage surgery.
"""

import sys
import time

from qhlab.cli import main


def run(tag, args):
    t0 = time.time()
    code = main(args)
    print("[%s] exit=%d elapsed=%.1fs" % (tag, code, time.time() - t0))
    return code


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/square"
    code = run("square", [
        "pipeline", "--domain", "square", "--j-max", "8", "--out", out,
    ])
    code |= run("beta-version", [
        "pipeline", "--domain", "square", "--beta", "0.5",
        "--surgery-j", "4", "--j-max", "8", "--out", out + "-beta",
    ])
    sys.exit(code)
