"""Dobrushin time of the three-state double-well Metropolis chain as beta grows.

Prints CSV: beta, dobrushin_coefficient, dobrushin_time.
"""

import sys

from mdk.ergodicity import dobrushin_time, dobrushin_tv, double_well


def main():
    sys.stdout.write("beta,dobrushin_coefficient,dobrushin_time\n")
    for beta in (0.5, 1, 2, 3, 4, 6, 8):
        P, _ = double_well(beta)
        sys.stdout.write(f"{beta},{dobrushin_tv(P)!r},{dobrushin_time(P, 0.5)}\n")


if __name__ == "__main__":
    main()
