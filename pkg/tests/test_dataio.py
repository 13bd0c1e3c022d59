import io
from pathlib import Path

import numpy as np
import pytest

from localf2 import Dataset, InputError, ModelSpec, build_design, group_by, load_csv

FIXTURE = Path(__file__).parent / "data" / "fixture6.csv"


def test_two_by_two():
    ds = load_csv(b"x,y\n1,2\n3,4\n")
    assert ds.names == ("x", "y")
    assert ds.n_rows == 2
    assert ds.column("y").tolist() == [2.0, 4.0]


def test_accepts_text_stream_and_path():
    assert load_csv(io.StringIO("a\n1\n")).n_rows == 1
    assert load_csv(io.BytesIO(b"a\n1\n")).n_rows == 1
    assert load_csv(str(FIXTURE)).n_rows == 6


def test_fixture_means_match_hand_sums():
    ds = load_csv(str(FIXTURE))
    # 1+..+6 = 21; 2.5+3.5+1+4+6.5+0.5 = 18; 10+..+60 = 210
    assert ds.column("x").mean() == pytest.approx(21 / 6, abs=1e-15)
    assert ds.column("y").mean() == pytest.approx(18 / 6, abs=1e-15)
    assert ds.column("z").mean() == pytest.approx(210 / 6, abs=1e-15)


def test_missing_marker_without_drop_is_error():
    with pytest.raises(InputError, match="missing"):
        load_csv(b"x,y\n1,NA\n2,3\n")


@pytest.mark.parametrize("marker", ["", "NA", "NaN"])
def test_drop_missing_counts_rows(marker):
    ds = load_csv(f"x,y\n1,{marker}\n2,3\n4,5\n".encode(), drop_missing=True)
    assert ds.n_rows == 2
    assert ds.dropped_rows == 1
    assert ds.column("x").tolist() == [2.0, 4.0]


def test_dropping_only_row_leaves_zero_rows():
    with pytest.raises(InputError, match="zero data rows"):
        load_csv(b"x,y\n1,NA\n", drop_missing=True)


@pytest.mark.parametrize(
    "raw, message",
    [
        (b"x,x\n1,2\n", "duplicate"),
        (b"x,y\n1,2,3\n", "fields"),
        (b"x,y\n", "zero data rows"),
        (b"", "header"),
        (b"x,y\n1,abc\n", "parse"),
        (b"x,y\n1,na\n", "parse"),
        (b"x,y\n1,inf\n", "parse"),
        (b"x,y\n1,1e999\n", "range"),
        (b"x,\n1,2\n", "empty column name"),
        (b'x,y\n1,"2\n', "malformed"),
        (b"x\n\xff\n", "UTF-8"),
    ],
)
def test_rejects_bad_input(raw, message):
    with pytest.raises(InputError, match=message):
        load_csv(raw)


def test_rfc4180_quoting():
    ds = load_csv(b'"a,b",c\n"1.5",2\n')
    assert ds.names == ("a,b", "c")
    assert ds.column("a,b")[0] == 1.5


def test_dataset_is_immutable():
    ds = load_csv(b"x,y\n1,2\n3,4\n")
    with pytest.raises(ValueError):
        ds.values[0, 0] = 9.0


def test_dataset_rejects_nonfinite():
    with pytest.raises(InputError, match="non-finite"):
        Dataset.from_columns({"a": [1.0, np.nan]})


def _ds(n=10, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset.from_columns({"y": rng.normal(size=n), "x1": rng.normal(size=n), "x2": rng.normal(size=n)})


def test_design_intercept_only_reduced_model():
    ds = _ds()
    X_A, X_AB, y = build_design(ds, ModelSpec("y", ("x1",)))
    assert X_A.shape == (10, 1) and np.all(X_A == 1.0)
    assert np.array_equal(X_AB[:, 1], ds.column("x1"))


def test_design_column_order():
    ds = _ds()
    X_A, X_AB, y = build_design(ds, ModelSpec("y", ("x2",), ("x1",)))
    assert X_AB.shape == (10, 3)
    assert np.array_equal(X_AB[:, 1], ds.column("x1"))
    assert np.array_equal(X_AB[:, 2], ds.column("x2"))
    # reduced design is the leading block of the full one
    assert np.array_equal(X_AB[:, : X_A.shape[1]], X_A)
    assert np.array_equal(y, ds.column("y"))


def test_design_is_pure():
    ds = _ds()
    spec = ModelSpec("y", ("x2",), ("x1",))
    a, b = build_design(ds, spec), build_design(ds, spec)
    for u, v in zip(a, b):
        assert u.tobytes() == v.tobytes()


def test_constant_predictor_is_named():
    ds = Dataset.from_columns({"y": np.arange(8.0), "x1": np.ones(8), "x2": np.arange(8.0) ** 2})
    with pytest.raises(InputError, match="x1"):
        build_design(ds, ModelSpec("y", ("x2",), ("x1",)))


def test_too_few_rows():
    ds = _ds(n=4)
    with pytest.raises(InputError, match="rows"):
        build_design(ds, ModelSpec("y", ("x2",), ("x1",)))


def test_unknown_column():
    with pytest.raises(InputError, match="nope"):
        build_design(_ds(), ModelSpec("y", ("nope",)))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(response="y", focal=("y",)),
        dict(response="y", focal=("x1",), covariates=("x1",)),
        dict(response="y", focal=()),
        dict(response="y", focal=("x1", "x1")),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InputError):
        ModelSpec(**kwargs)


def test_group_by_requires_two_groups():
    ds = Dataset.from_columns({"y": [1.0, 2.0, 3.0], "g": [1.0, 1.0, 1.0]})
    with pytest.raises(InputError, match="2 distinct groups"):
        group_by(ds, "g")


def test_group_by_codes():
    ds = Dataset.from_columns({"y": [1.0, 2.0, 3.0, 4.0], "g": [7.0, 3.0, 7.0, 3.0]})
    g = group_by(ds, "g")
    assert g.group_index.tolist() == [1, 0, 1, 0]
    assert g.n_groups == 2
