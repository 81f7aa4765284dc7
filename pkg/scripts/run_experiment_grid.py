#!/usr/bin/env python3
"""Random-instance experiment grid with aggregated statistics.

Reproduces the benchmark protocol: per (depot count, satellite count)
cell, solve a batch of seeded random instances and aggregate reduction,
iteration and timing statistics plus the solve success rate.  The full
published grid (n_d 1..5 x n_t 5..20, 100 instances per cell) takes many
hours; the defaults here are a lighter sweep.
"""

import argparse
import sys

from depotopt.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-d-list", type=int, nargs="+", default=[1, 2, 3])
    parser.add_argument("--n-t-list", type=int, nargs="+", default=[5, 10])
    parser.add_argument("--count", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--time-limit", type=float, default=100.0)
    parser.add_argument("--out", default="./results/grid")
    args = parser.parse_args()
    return cli_main(
        [
            "experiment",
            "--n-d-list", *[str(v) for v in args.n_d_list],
            "--n-t-list", *[str(v) for v in args.n_t_list],
            "--count", str(args.count),
            "--seed", str(args.seed),
            "--jobs", str(args.jobs),
            "--time-limit", str(args.time_limit),
            "--out", args.out,
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
