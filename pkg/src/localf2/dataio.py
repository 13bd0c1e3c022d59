"""CSV ingestion, validation and design-matrix construction.

Only pre-built numeric columns are accepted. The CSV dialect is RFC 4180
with a mandatory header row; the recognised missing markers are exactly
``""``, ``"NA"`` and ``"NaN"``.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import InputError

MISSING_MARKERS = frozenset({"", "NA", "NaN"})
INTERCEPT = "(Intercept)"

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Named numeric columns of equal length.

    The values live in a read-only ``(n_rows, n_columns)`` array; row order is
    the order of the source.
    """

    names: tuple[str, ...]
    values: np.ndarray
    dropped_rows: int = 0

    def __post_init__(self):
        names = tuple(self.names)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise InputError(
                f"expected a 2-D array with {len(names)} columns, got shape {values.shape}"
            )
        for name in names:
            if not isinstance(name, str) or not name:
                raise InputError("column names must be non-empty strings")
        seen = set()
        for name in names:
            if name in seen:
                raise InputError(f"duplicate column name {name!r}")
            seen.add(name)
        if values.shape[0] == 0:
            raise InputError("zero data rows")
        if not np.all(np.isfinite(values)):
            bad = [n for n, ok in zip(names, np.isfinite(values).all(axis=0)) if not ok]
            raise InputError(f"non-finite values in column(s): {', '.join(bad)}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def from_columns(cls, columns, dropped_rows=0):
        """Build from a mapping or a sequence of ``(name, values)`` pairs."""
        pairs = list(columns.items()) if hasattr(columns, "items") else list(columns)
        if not pairs:
            raise InputError("a dataset needs at least one column")
        lengths = {len(v) for _, v in pairs}
        if len(lengths) != 1:
            raise InputError("all columns must have the same number of values")
        names = [name for name, _ in pairs]
        values = np.column_stack([np.asarray(v, dtype=float) for _, v in pairs])
        return cls(tuple(names), values, dropped_rows)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self):
        """Ordered ``(name, values)`` pairs."""
        return [(name, self.values[:, j]) for j, name in enumerate(self.names)]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.names.index(name)
        except ValueError:
            raise InputError(f"unknown column {name!r}") from None
        return self.values[:, j]

    def take(self, rows) -> "Dataset":
        """Row subset (or resample, when ``rows`` repeats indices)."""
        return Dataset(self.names, self.values[np.asarray(rows)], self.dropped_rows)

    def __contains__(self, name):
        return name in self.names


@dataclass(frozen=True)
class GroupedDataset:
    """A dataset plus one grouping factor for random-intercept models."""

    base: Dataset
    group_column: str
    group_index: np.ndarray  # integer code per row, 0..n_groups-1
    group_labels: tuple = field(default=())

    def __post_init__(self):
        codes = np.asarray(self.group_index)
        if codes.shape != (self.base.n_rows,):
            raise InputError("every row needs exactly one group")
        if not np.issubdtype(codes.dtype, np.integer):
            raise InputError("group codes must be integers")
        n_groups = len(np.unique(codes))
        if n_groups < 2:
            raise InputError("at least 2 distinct groups are required")
        codes = codes.copy()
        codes.flags.writeable = False
        object.__setattr__(self, "group_index", codes)

    @property
    def n_groups(self) -> int:
        return int(self.group_index.max()) + 1


def group_by(dataset: Dataset, column: str) -> GroupedDataset:
    """Attach the grouping factor held in ``column`` (any distinct value is a group)."""
    labels, codes = np.unique(dataset.column(column), return_inverse=True)
    return GroupedDataset(dataset, column, codes.astype(np.intp), tuple(labels.tolist()))


@dataclass(frozen=True)
class ModelSpec:
    """Response, focal block B and covariate set A. The intercept is implicit."""

    response: str
    focal: tuple[str, ...]
    covariates: tuple[str, ...] = ()

    def __post_init__(self):
        focal = (self.focal,) if isinstance(self.focal, str) else tuple(self.focal)
        covariates = (
            (self.covariates,) if isinstance(self.covariates, str) else tuple(self.covariates)
        )
        object.__setattr__(self, "focal", focal)
        object.__setattr__(self, "covariates", covariates)
        if not focal:
            raise InputError("the focal block B must name at least one column")
        if len(set(focal)) != len(focal) or len(set(covariates)) != len(covariates):
            raise InputError("a column is listed twice in the model specification")
        if self.response in focal or self.response in covariates:
            raise InputError(f"response {self.response!r} also appears as a predictor")
        overlap = set(focal) & set(covariates)
        if overlap:
            raise InputError(
                f"column(s) in both focal block and covariates: {', '.join(sorted(overlap))}"
            )

    @property
    def p_full(self) -> int:
        """Predictor count of the full model, intercept excluded."""
        return len(self.focal) + len(self.covariates)

    def names_reduced(self) -> tuple[str, ...]:
        return (INTERCEPT, *self.covariates)

    def names_full(self) -> tuple[str, ...]:
        return (INTERCEPT, *self.covariates, *self.focal)

    def validate(self, dataset: Dataset) -> None:
        for name in (self.response, *self.covariates, *self.focal):
            if name not in dataset:
                raise InputError(f"unknown column {name!r}")


class Design(NamedTuple):
    X_A: np.ndarray
    X_AB: np.ndarray
    y: np.ndarray


def build_design(dataset: Dataset, spec: ModelSpec) -> Design:
    """Reduced (intercept + A) and full (intercept + A + B) design matrices.

    B's columns are appended after A's in spec order, so the reduced design is
    always the leading block of the full one.
    """
    spec.validate(dataset)
    n = dataset.n_rows
    if n < spec.p_full + 3:
        raise InputError(
            f"need at least {spec.p_full + 3} rows for {spec.p_full} predictors, have {n}"
        )
    for name in (*spec.covariates, *spec.focal, spec.response):
        col = dataset.column(name)
        if np.all(col == col[0]):
            raise InputError(f"column {name!r} is constant (zero variance)")
    ones = np.ones((n, 1))
    X_A = np.hstack([ones, *(dataset.column(c)[:, None] for c in spec.covariates)])
    X_AB = np.hstack([X_A, *(dataset.column(c)[:, None] for c in spec.focal)])
    y = dataset.column(spec.response).copy()
    for a in (X_A, X_AB, y):
        a.flags.writeable = False
    return Design(X_A, X_AB, y)


Source = Union[bytes, str, IO[bytes], IO[str]]


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        raw = source
    elif isinstance(source, str):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
        if isinstance(raw, str):
            return raw
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"input is not valid UTF-8: {exc}") from None


def _parse_rows(text: str) -> tuple[list[str], list[list[str]]]:
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise InputError(f"malformed CSV (line {reader.line_num}): {exc}") from None
    if not rows:
        raise InputError("malformed CSV: no header row")
    header, body = rows[0], rows[1:]
    # a trailing blank line yields an empty record; RFC 4180 permits it at EOF
    while body and body[-1] == []:
        body.pop()
    return header, body


def load_csv(source: Source, drop_missing: bool = False) -> Dataset:
    """Parse an RFC 4180 CSV with a header row into a :class:`Dataset`.

    Args:
        source: raw bytes, a path, or a binary/text stream.
        drop_missing: listwise-delete rows holding a missing marker instead of
            failing. The number of removed rows is kept in ``dropped_rows``.
    """
    header, body = _parse_rows(_read_text(source))
    if any(h == "" for h in header):
        raise InputError("malformed CSV: empty column name in header")
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise InputError(f"duplicate header name(s): {', '.join(dupes)}")

    k = len(header)
    values = np.empty((len(body), k))
    keep = np.ones(len(body), dtype=bool)
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != k:
            raise InputError(f"malformed CSV: line {line} has {len(row)} fields, expected {k}")
        for j, cell in enumerate(row):
            if cell in MISSING_MARKERS:
                if not drop_missing:
                    raise InputError(
                        f"missing value in column {header[j]!r} at line {line} "
                        "(use drop_missing to delete incomplete rows)"
                    )
                keep[i] = False
                values[i, j] = np.nan
            elif _NUMBER.match(cell):
                values[i, j] = float(cell)
                if not np.isfinite(values[i, j]):
                    raise InputError(f"value out of range in column {header[j]!r} at line {line}")
            else:
                raise InputError(f"cannot parse {cell!r} in column {header[j]!r} at line {line}")
    if not keep.all():
        values = values[keep]
    if values.shape[0] == 0:
        raise InputError("zero data rows")
    return Dataset(tuple(header), values, dropped_rows=int((~keep).sum()))


def select(dataset: Dataset, names: Iterable[str]) -> np.ndarray:
    """Columns ``names`` as an ``(n, k)`` array, in the given order."""
    names: Sequence[str] = list(names)
    return np.column_stack([dataset.column(n) for n in names]) if names else np.empty(
        (dataset.n_rows, 0)
    )
