#!/usr/bin/env python3
"""Run the full energy dispatch case study and print a summary.

Equivalent to `sphrad solve-energy` with default parameters; writes the
solution, the iteration trace, and plot-ready CSV under --out.
"""

import argparse
import sys

from sphrad.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="energy_out")
    parser.add_argument("--n", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()
    argv = ["solve-energy", "--out", args.out, "--n", str(args.n)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
