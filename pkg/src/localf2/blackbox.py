"""Permutation-based local f² for arbitrary scalar regressors.

A prediction oracle maps an ``(n, k)`` matrix of predictor rows to ``n``
predictions. The local f² of one column is the drop in an R²-like score when
that column alone is shuffled, scaled by the unexplained share of the intact
score.

External models are reached through a line protocol on a child process:

* on startup the child writes ``EFFSIZE-ORACLE 1`` and a newline;
* each request is a CSV header line, one CSV line per row, then an empty line;
* the child answers with one decimal number per row, newline-terminated.

All text is UTF-8 with ``\\n`` line endings and ``.`` as decimal separator.
"""

from __future__ import annotations

import csv
import io
import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .effectsize import DENOMINATOR_GUARD
from .errors import DenominatorGuardError, InputError, OracleError
from .regression import LinearFit
from .resampling import _map, replicate_rng

HANDSHAKE = "EFFSIZE-ORACLE 1"
CORRELATION_WARNING = 0.5
PROBE_ROWS = 8


class PredictionOracle:
    """A callable regressor plus the names of the predictors it expects.

    ``deterministic`` oracles are checked once, on first use, by predicting
    the same probe batch twice.
    """

    def __init__(self, predict: Callable[[np.ndarray], np.ndarray], predictor_names: Sequence[str], deterministic: bool = True):
        self._predict = predict
        self.predictor_names = tuple(predictor_names)
        self.deterministic = deterministic
        self._verified = not deterministic
        self._lock = threading.Lock()

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.predictor_names):
            raise InputError(
                f"oracle expects {len(self.predictor_names)} predictor columns, got shape {X.shape}"
            )
        try:
            out = np.asarray(self._predict(X), dtype=float).reshape(-1)
        except OracleError:
            raise
        except (TypeError, ValueError) as exc:
            raise OracleError(f"oracle returned unusable output: {exc}") from None
        if out.shape[0] != X.shape[0]:
            raise OracleError(f"oracle returned {out.shape[0]} predictions for {X.shape[0]} rows")
        if not np.all(np.isfinite(out)):
            raise OracleError("oracle returned non-finite predictions")
        return out

    def verify(self, X) -> None:
        """Probe determinism with a repeated batch (once per oracle)."""
        with self._lock:
            if self._verified:
                return
            probe = np.asarray(X, dtype=float)[:PROBE_ROWS]
            first, second = self(probe), self(probe)
            if not np.array_equal(first, second):
                raise OracleError("oracle is flagged deterministic but gave different predictions for the same rows")
            self._verified = True


def ols_oracle(fit: LinearFit, predictor_names: Optional[Sequence[str]] = None) -> PredictionOracle:
    """Wrap a fitted linear model; the oracle takes the non-intercept columns."""
    names = predictor_names if predictor_names is not None else fit.names[1:]
    return PredictionOracle(fit.predict, names)


def oracle_r2(oracle: PredictionOracle, X, y) -> float:
    """``1 - MSE / var(y)`` with the 1/n variance; negative when worse than the mean."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise InputError("X and y have different row counts")
    if y.shape[0] < 30:
        raise InputError(f"need at least 30 rows, have {y.shape[0]}")
    var = float(np.mean((y - y.mean()) ** 2))
    if var == 0.0:
        raise InputError("response is constant")
    pred = oracle(X)
    mse = float(np.mean((y - pred) ** 2))
    return 1.0 - mse / var


@dataclass(frozen=True)
class PermutationConfig:
    """``holdout`` of ``None`` evaluates on the supplied rows; a fraction in
    (0, 0.5] evaluates on a seeded random subset of that size instead."""

    repeats: int = 30
    seed: int = 0
    holdout: Optional[float] = None

    def __post_init__(self):
        if self.repeats < 5:
            raise InputError("at least 5 permutation repeats are required")
        if self.holdout is not None and not 0.0 < self.holdout <= 0.5:
            raise InputError("holdout fraction must lie in (0, 0.5]")


def holdout_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``(train_rows, holdout_rows)`` as used by a holdout :class:`PermutationConfig`.

    Fit the model on ``train_rows`` before handing it over as an oracle.
    """
    order = replicate_rng(seed, 2**32 - 1).permutation(n)
    k = max(1, int(round(fraction * n)))
    return np.sort(order[k:]), np.sort(order[:k])


class PermutationResult(NamedTuple):
    f2: float
    spread: float
    r2_base: float
    r2_permuted: tuple[float, ...]
    warnings: tuple[str, ...]


def permutation_local_f2(
    oracle: PredictionOracle, X, y, focal: int, config: PermutationConfig = PermutationConfig(), workers: int = 1
) -> PermutationResult:
    """Local f² of column ``focal`` by permuting it ``config.repeats`` times.

    ``f2`` is the mean of the per-repeat values
    ``(R²_base - R²_perm) / (1 - R²_base)`` and ``spread`` their standard
    deviation.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0 <= focal < X.shape[1]:
        raise InputError(f"focal column index {focal} out of range for {X.shape[1]} columns")
    warnings = []
    if config.holdout is None:
        warnings.append("evaluated on the supplied data: in-sample R² is optimistic")
    else:
        _, rows = holdout_split(X.shape[0], config.holdout, config.seed)
        X, y = X[rows], y[rows]
    oracle.verify(X)
    r2_base = oracle_r2(oracle, X, y)
    denom = 1.0 - r2_base
    if not denom >= DENOMINATOR_GUARD:
        raise DenominatorGuardError(
            f"baseline R² too close to 1 (1 - R² = {denom:.3e} < {DENOMINATOR_GUARD:g})"
        )

    col = X[:, focal]
    sorted_col = np.sort(col)
    for j in range(X.shape[1]):
        if j == focal or np.ptp(X[:, j]) == 0 or np.ptp(col) == 0:
            continue
        r = float(np.corrcoef(col, X[:, j])[0, 1])
        if abs(r) > CORRELATION_WARNING:
            name = oracle.predictor_names[j]
            warnings.append(
                f"focal column correlates with {name!r} (r = {r:.3f}); permutation breaks "
                "the joint distribution and the estimate may be distorted"
            )

    def one(r):
        perm = replicate_rng(config.seed, r).permutation(X.shape[0])
        Xp = X.copy()
        Xp[:, focal] = col[perm]
        if not np.array_equal(np.sort(Xp[:, focal]), sorted_col):
            raise AssertionError("permutation changed the focal column's values")
        return oracle_r2(oracle, Xp, y)

    if not oracle.deterministic or isinstance(oracle, SubprocessOracle):
        workers = 1
    r2_perm = tuple(_map(one, range(config.repeats), workers))
    per = [(r2_base - r) / denom for r in r2_perm]
    f2 = math.fsum(per) / len(per)
    spread = math.sqrt(math.fsum((v - f2) ** 2 for v in per) / (len(per) - 1))
    if abs(f2) < 2 * spread:
        warnings.append("f2 is indistinguishable from zero at this spread")
    return PermutationResult(f2, spread, r2_base, r2_perm, tuple(warnings))


def _format_batch(names: Sequence[str], X: np.ndarray) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in X:
        w.writerow([repr(float(v)) for v in row])
    buf.write("\n")
    return buf.getvalue().encode("utf-8")


class SubprocessOracle(PredictionOracle):
    """Oracle served by a child process speaking the line protocol.

    Use as a context manager, or call :meth:`close`.
    """

    def __init__(self, command: Sequence[str], predictor_names: Sequence[str], timeout: float = 60.0, deterministic: bool = True):
        super().__init__(self._request, predictor_names, deterministic)
        self.command = list(command)
        self.timeout = timeout
        self._lines: "queue.Queue[Optional[bytes]]" = queue.Queue()
        self._io = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
            )
        except OSError as exc:
            raise OracleError(f"cannot start oracle command {self.command!r}: {exc}") from None
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        first = self._readline("handshake")
        if first != HANDSHAKE:
            self.close()
            raise OracleError(f"oracle handshake failed; child's first line was {first!r}")

    def _pump(self):
        for line in iter(self._proc.stdout.readline, b""):
            self._lines.put(line)
        self._lines.put(None)

    def _readline(self, what: str) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._kill()
            raise OracleError(f"oracle timed out after {self.timeout} s waiting for {what}") from None
        if line is None:
            raise OracleError(f"oracle exited while waiting for {what}")
        try:
            return line.decode("utf-8").rstrip("\n")
        except UnicodeDecodeError:
            raise OracleError("oracle wrote invalid UTF-8") from None

    def _request(self, X: np.ndarray) -> np.ndarray:
        with self._io:
            try:
                self._proc.stdin.write(_format_batch(self.predictor_names, X))
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise OracleError(f"oracle stopped accepting input: {exc}") from None
            out = np.empty(X.shape[0])
            for i in range(X.shape[0]):
                text = self._readline(f"prediction {i + 1} of {X.shape[0]}")
                try:
                    out[i] = float(text)
                except ValueError:
                    raise OracleError(f"oracle reply {text!r} is not a decimal number") from None
            return out

    def _kill(self):
        proc = getattr(self, "_proc", None)
        if proc is not None and proc.poll() is None:
            proc.kill()
            proc.wait()

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None or proc.poll() is not None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

