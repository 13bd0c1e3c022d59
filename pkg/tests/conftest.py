import sys

import numpy as np
import pytest

from localf2 import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def make_dataset(rng, n=200, coefs=(0.5, 0.3), noise=1.0):
    """y = sum(coef_j * x_j) + noise with independent standard-normal x_j."""
    X = rng.standard_normal((n, len(coefs)))
    y = X @ np.asarray(coefs) + noise * rng.standard_normal(n)
    cols = {"y": y}
    cols.update({f"x{j + 1}": X[:, j] for j in range(len(coefs))})
    return Dataset.from_columns(cols)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
