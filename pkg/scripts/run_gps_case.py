#!/usr/bin/env python3
"""Run the bundled GPS-constellation case end to end.

Solves the 18-satellite, 3-depot servicing problem from its bundled
initial depot guesses, writes result files, and prints the headline
numbers.  Expect roughly five minutes with the default 100 s routing
budget.
"""

import argparse
import sys

from depotopt.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="./results/gps18")
    parser.add_argument("--time-limit", type=float, default=100.0)
    parser.add_argument("--max-iter", type=int, default=20)
    args = parser.parse_args()
    return cli_main(
        [
            "solve", "gps18",
            "--time-limit", str(args.time_limit),
            "--max-iter", str(args.max_iter),
            "--out", args.out,
            "--verbose",
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
