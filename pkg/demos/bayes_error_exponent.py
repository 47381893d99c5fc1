"""Monte-Carlo Bayes error of the optimal test on a two-state pair, next to the
Chernoff information and the exact error from type-class enumeration.

Prints CSV: n, pe_mc, stderr, pe_exact, minus_log_pe_over_n (from the exact
value when enumeration is within its cap, otherwise from the estimate).
"""

import math
import sys

import numpy as np

from mdk.errors import CapacityError
from mdk.hypothesis import bayes_error_exact, bayes_error_mc, chernoff_information

P0 = np.array([[0.75, 0.25], [0.25, 0.75]])
P1 = P0[::-1].copy()
PI = np.array([0.5, 0.5])


def main(trials: int = 10**5):
    c = chernoff_information(P0, P1, PI)
    fit = bayes_error_mc(P0, P1, PI, (0.5, 0.5), (1, 2, 4, 8, 16, 32), trials, seed=0)
    out = sys.stdout
    out.write(f"# chernoff={c.value!r} alpha_star={c.alpha_star!r} slope={fit.slope!r}\n")
    out.write("n,pe_mc,stderr,pe_exact,minus_log_pe_over_n\n")
    for pt in fit.points:
        try:
            exact = bayes_error_exact(P0, P1, PI, (0.5, 0.5), pt.n)
        except CapacityError:
            # enumeration is capped; fall back to the Monte-Carlo estimate
            out.write(f"{pt.n},{pt.pe!r},{pt.stderr!r},,{-math.log(pt.pe) / pt.n!r}\n")
            continue
        out.write(f"{pt.n},{pt.pe!r},{pt.stderr!r},{exact!r},{-math.log(exact) / pt.n!r}\n")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10**5)
