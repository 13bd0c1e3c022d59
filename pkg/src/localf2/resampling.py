"""Case-bootstrap intervals for local f² and a Monte Carlo stability harness.

Every replicate draws from its own Philox stream keyed by ``(seed, index)``,
so results do not depend on how many workers run the replicates or in which
order they finish.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .dataio import Dataset, ModelSpec, build_design
from .effectsize import adjusted_r2, local_f2
from .errors import InputError, NumericalError, RankDeficiencyError
from .regression import fit_ols

ESTIMATORS = ("r2", "adj_r2_ezekiel", "adj_r2_olkin_pratt", "f2_local")


def replicate_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent counter-based stream for replicate ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var)


# --------------------------------------------------------------------------- bootstrap


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 2000
    level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 200:
            raise InputError("bootstrap needs at least 200 replicates")
        if not 0.0 < self.level < 1.0:
            raise InputError(f"level must lie in (0, 1), got {self.level!r}")


class BootstrapInterval(NamedTuple):
    low: float
    high: float
    level: float
    estimate: float
    replicates: int
    skipped: int


def _f2_from_design(X_A, X_AB, y) -> float:
    r2_A = fit_ols(X_A, y).r2
    r2_AB = fit_ols(X_AB, y).r2
    return local_f2(min(r2_A, r2_AB), r2_AB)


def bootstrap_f2_ci(
    dataset: Dataset, spec: ModelSpec, config: BootstrapConfig = BootstrapConfig(), workers: int = 1
) -> BootstrapInterval:
    """Percentile interval for the local f² of ``spec.focal`` by row resampling.

    Replicates whose resample is degenerate (rank deficient, constant
    response, R² at 1) are skipped; more than 1% skipped is an error.
    """
    X_A, X_AB, y = build_design(dataset, spec)
    n = len(y)
    if n < 30:
        raise InputError(f"bootstrap needs at least 30 rows, have {n}")
    estimate = _f2_from_design(X_A, X_AB, y)

    def one(b):
        idx = replicate_rng(config.seed, b).integers(0, n, size=n)
        try:
            return _f2_from_design(X_A[idx], X_AB[idx], y[idx])
        except (NumericalError, InputError):
            return None

    values = _map(one, range(config.replicates), workers)
    good = np.array([v for v in values if v is not None])
    skipped = config.replicates - good.size
    if skipped > 0.01 * config.replicates:
        raise NumericalError(
            f"{skipped} of {config.replicates} bootstrap replicates were degenerate (limit 1%)"
        )
    alpha = 1.0 - config.level
    low, high = np.quantile(good, [alpha / 2, 1.0 - alpha / 2])
    return BootstrapInterval(float(low), float(high), config.level, estimate, config.replicates, skipped)


# --------------------------------------------------------------------------- Monte Carlo


@dataclass(frozen=True)
class Population:
    """Gaussian predictors ``X ~ N(0, cov)`` and ``y = X beta + N(0, noise_var)``.

    The last ``n_focal`` predictors form block B.
    """

    beta: tuple[float, ...]
    noise_var: float = 1.0
    n_focal: int = 1
    cov: Optional[np.ndarray] = None

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        object.__setattr__(self, "beta", beta)
        if not self.noise_var > 0:
            raise InputError("noise variance must be positive")
        if not 1 <= self.n_focal <= len(beta):
            raise InputError("n_focal must be between 1 and the number of predictors")
        if self.cov is not None:
            cov = np.asarray(self.cov, dtype=float)
            if cov.shape != (len(beta), len(beta)) or not np.allclose(cov, cov.T):
                raise InputError("covariance must be a symmetric p×p matrix")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise InputError("covariance must be positive definite") from None
            object.__setattr__(self, "cov", cov)

    @classmethod
    def from_targets(cls, rho2_A: float, rho2_AB: float, n_covariates: int, n_focal: int = 1):
        """Identity-covariance population hitting the given ρ² pair (noise variance 1)."""
        if not 0.0 <= rho2_A <= rho2_AB < 1.0:
            raise InputError("need 0 ≤ ρ²_A ≤ ρ²_AB < 1")
        if n_covariates == 0 and rho2_A > 0:
            raise InputError("ρ²_A > 0 requires at least one covariate")
        total = 1.0 / (1.0 - rho2_AB)  # var(y) with unit noise
        ss_A, ss_B = rho2_A * total, (rho2_AB - rho2_A) * total
        beta_A = [math.sqrt(ss_A / n_covariates)] * n_covariates if n_covariates else []
        beta_B = [math.sqrt(ss_B / n_focal)] * n_focal
        return cls(tuple(beta_A + beta_B), 1.0, n_focal)

    @property
    def p(self) -> int:
        return len(self.beta)

    def _cov(self):
        return np.eye(self.p) if self.cov is None else self.cov

    def rho2(self) -> tuple[float, float]:
        """Population (ρ²_A, ρ²_AB)."""
        S = self._cov()
        b = np.array(self.beta)
        explained = float(b @ S @ b)
        var_y = explained + self.noise_var
        k = self.p - self.n_focal
        if k == 0:
            explained_A = 0.0
        else:
            # variance of E[y | X_A]
            c = S[:k, :] @ b
            explained_A = float(c @ np.linalg.solve(S[:k, :k], c))
        return explained_A / var_y, explained / var_y

    def f2_local(self) -> float:
        r2_A, r2_AB = self.rho2()
        return (r2_AB - r2_A) / (1.0 - r2_AB)

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        Z = rng.standard_normal((n, self.p))
        X = Z if self.cov is None else Z @ np.linalg.cholesky(self.cov).T
        y = X @ np.array(self.beta) + math.sqrt(self.noise_var) * rng.standard_normal(n)
        return X, y


@dataclass(frozen=True)
class MonteCarloConfig:
    population: Population
    n_grid: tuple[int, ...]
    reps_per_n: int = 1000
    seed: int = 0

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InputError("n_grid must be non-empty and strictly increasing")
        if grid[0] < self.population.p + 3:
            raise InputError(f"smallest n must be at least p + 3 = {self.population.p + 3}")
        if self.reps_per_n < 100:
            raise InputError("reps_per_n must be at least 100")


class SummaryRow(NamedTuple):
    estimator: str
    n: int
    mean: float
    sd: float
    bias: float
    population_value: float
    reps: int


@dataclass(frozen=True)
class StabilitySummary:
    rows: tuple[SummaryRow, ...]
    rho2_A: float
    rho2_AB: float
    f2_population: float
    skipped: int = 0
    warnings: tuple[str, ...] = field(default=())
    replicates: Optional[dict] = field(default=None, compare=False, repr=False)

    def get(self, estimator: str, n: int) -> SummaryRow:
        for row in self.rows:
            if row.estimator == estimator and row.n == n:
                return row
        raise KeyError((estimator, n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SummaryRow._fields)
        for r in self.rows:
            w.writerow([r.estimator, r.n, repr(r.mean), repr(r.sd), repr(r.bias), repr(r.population_value), r.reps])
        return buf.getvalue()


def _estimates(X: np.ndarray, y: np.ndarray, n_focal: int) -> Optional[tuple[float, ...]]:
    n, p = X.shape
    ones = np.ones((n, 1))
    X_AB = np.hstack([ones, X])
    X_A = X_AB[:, : 1 + p - n_focal]
    try:
        r2_AB = fit_ols(X_AB, y).r2
        r2_A = fit_ols(X_A, y).r2
        f2 = local_f2(min(r2_A, r2_AB), r2_AB)
    except (RankDeficiencyError, NumericalError, InputError):
        return None
    return (
        r2_AB,
        adjusted_r2(r2_AB, n, p, "ezekiel"),
        adjusted_r2(r2_AB, n, p, "olkin_pratt"),
        f2,
    )


def monte_carlo_stability(
    config: MonteCarloConfig, workers: int = 1, keep_replicates: bool = False
) -> StabilitySummary:
    """Sampling mean, sd and bias of R², shrunken R² and local f² over ``n_grid``."""
    pop = config.population
    rho2_A, rho2_AB = pop.rho2()
    f2_pop = pop.f2_local()
    truth = {"r2": rho2_AB, "adj_r2_ezekiel": rho2_AB, "adj_r2_olkin_pratt": rho2_AB, "f2_local": f2_pop}

    rows, kept, skipped = [], {}, 0
    for i, n in enumerate(config.n_grid):

        def one(r, n=n, i=i):
            X, y = pop.sample(n, replicate_rng(config.seed, i, r))
            return _estimates(X, y, pop.n_focal)

        results = [v for v in _map(one, range(config.reps_per_n), workers) if v is not None]
        skipped += config.reps_per_n - len(results)
        if len(results) < 2:
            raise NumericalError(f"every replicate at n={n} was degenerate")
        columns = list(zip(*results))
        for name, values in zip(ESTIMATORS, columns):
            mean, sd = _mean_sd(values)
            rows.append(SummaryRow(name, n, mean, sd, mean - truth[name], truth[name], len(values)))
            if keep_replicates:
                kept[(name, n)] = np.array(values)
    warnings = (f"{skipped} degenerate replicate(s) skipped",) if skipped else ()
    return StabilitySummary(
        tuple(rows), rho2_A, rho2_AB, f2_pop, skipped, warnings, kept if keep_replicates else None
    )
