"""Constant-prediction oracle: answers every row with ``--mean`` (default 0).

Because it ignores its inputs, every permutation f² against it is exactly 0.

    python -m localf2.oracles.echo_mean --mean 3.5
"""

import argparse

from . import serve


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mean", type=float, default=0.0)
    args = parser.parse_args(argv)
    serve(lambda header, rows: [args.mean] * len(rows))


if __name__ == "__main__":
    main()
