"""Linear oracle: ``intercept + sum(coef[name] * row[name])``.

    python -m localf2.oracles.linear --intercept 1 --coef x1=2 --coef x2=-0.5

Columns without a coefficient are ignored.
"""

import argparse

from . import serve


def _pair(text):
    name, _, value = text.partition("=")
    return name, float(value)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--intercept", type=float, default=0.0)
    parser.add_argument("--coef", type=_pair, action="append", default=[])
    args = parser.parse_args(argv)
    coef = dict(args.coef)

    def predict(header, rows):
        weights = [coef.get(name, 0.0) for name in header]
        return [args.intercept + sum(w * v for w, v in zip(weights, row) if w) for row in rows]

    serve(predict)


if __name__ == "__main__":
    main()
