"""Ordinary least squares through a Householder QR factorization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import t_quantile
from .errors import InputError, RankDeficiencyError

#: |R_jj| below this fraction of max |R_ii| (after column equilibration) is rank deficiency
RANK_TOL = 1e-10


@dataclass(frozen=True)
class LinearFit:
    """Result of :func:`fit_ols`. Column 0 of the design is the intercept."""

    coefficients: np.ndarray
    std_errors: np.ndarray
    residuals: np.ndarray
    rss: float
    tss: float
    r2: float
    adj_r2_ezekiel: float
    df_residual: int
    sigma2_hat: float
    condition_estimate: float
    n: int
    names: tuple[str, ...]

    @property
    def p(self) -> int:
        """Number of predictors, intercept excluded."""
        return len(self.coefficients) - 1

    def predict(self, X_no_intercept: np.ndarray) -> np.ndarray:
        X = np.asarray(X_no_intercept, dtype=float)
        return self.coefficients[0] + X @ self.coefficients[1:]


def _dependent_set(R: np.ndarray, j: int, tol: float) -> list[int]:
    """Columns that column ``j`` is (numerically) a combination of, plus ``j``."""
    if j == 0:
        return [0]
    c = solve_triangular(R[:j, :j], R[:j, j])
    big = np.abs(c) > tol * max(1.0, np.abs(c).max())
    return [int(i) for i in np.flatnonzero(big)] + [j]


def fit_ols(X, y, names: Optional[Sequence[str]] = None) -> LinearFit:
    """Least-squares fit of ``y`` on ``X`` (whose first column is the intercept).

    Columns are scaled to unit norm before the factorization so that the rank
    test does not depend on the units of the predictors. Standard errors come
    from ``R^{-1}``; the normal equations are never formed.

    Raises:
        RankDeficiencyError: a diagonal of ``R`` is below ``RANK_TOL`` times
            the largest one. ``columns`` on the exception names the dependent set.
        InputError: shape mismatch, too few rows, or a constant response.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InputError(f"X {X.shape} and y {y.shape} do not conform")
    n, k = X.shape
    if k < 1:
        raise InputError("design needs at least the intercept column")
    if n <= k + 1:
        raise InputError(f"{n} rows is too few for {k} coefficients (need > {k + 1})")
    if names is None:
        names = ("(Intercept)",) + tuple(f"x{j}" for j in range(1, k))
    names = tuple(names)

    scale = np.linalg.norm(X, axis=0)
    zero = np.flatnonzero(scale == 0)
    if zero.size:
        cols = [names[j] for j in zero]
        raise RankDeficiencyError(f"all-zero design column(s): {', '.join(cols)}", cols)
    Q, R = np.linalg.qr(X / scale, mode="reduced")
    diag = np.abs(np.diag(R))
    bad = np.flatnonzero(diag < RANK_TOL * diag.max())
    if bad.size:
        cols = [names[j] for j in _dependent_set(R, int(bad[0]), 1e-6)]
        raise RankDeficiencyError(
            f"rank-deficient design: {', '.join(cols)} are linearly dependent", cols
        )

    beta = solve_triangular(R, Q.T @ y) / scale
    resid = y - X @ beta
    rss = float(resid @ resid)
    yc = y - y.mean()
    tss = float(yc @ yc)
    if tss == 0.0:
        raise InputError("response is constant; R² is undefined")
    df = n - k
    sigma2 = rss / df
    Rinv = solve_triangular(R, np.eye(k))
    se = np.sqrt(sigma2 * np.einsum("ij,ij->i", Rinv, Rinv)) / scale
    r2 = min(max(1.0 - rss / tss, 0.0), 1.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / df
    for a in (beta, se, resid):
        a.flags.writeable = False
    return LinearFit(
        coefficients=beta,
        std_errors=se,
        residuals=resid,
        rss=rss,
        tss=tss,
        r2=r2,
        adj_r2_ezekiel=adj,
        df_residual=df,
        sigma2_hat=sigma2,
        condition_estimate=float(np.linalg.cond(R)),
        n=n,
        names=names,
    )


class CoefficientInterval(NamedTuple):
    name: str
    low: float
    high: float


def coefficient_intervals(fit: LinearFit, level: float = 0.95) -> list[CoefficientInterval]:
    """Two-sided t intervals ``beta_i ± t*(df, (1+level)/2) · se_i``."""
    if not 0.0 < level < 1.0:
        raise InputError(f"level must lie in (0, 1), got {level!r}")
    tcrit = t_quantile(0.5 * (1.0 + level), fit.df_residual)
    out = []
    for name, b, se in zip(fit.names, fit.coefficients, fit.std_errors):
        half = tcrit * se
        out.append(CoefficientInterval(name, float(b - half), float(b + half)))
    return out
