"""Random-intercept linear mixed model and its local f².

Model: ``y = X beta + u[group] + e`` with ``u ~ N(0, s2_u)``, ``e ~ N(0, s2_e)``.
Writing ``theta = s2_u / s2_e``, the covariance is ``s2_e * H(theta)`` with a
block ``I + theta * 11'`` per group. ``H^{-1/2}`` has the closed form
``x -> x - c_g * mean_g(x)``, ``c_g = 1 - 1/sqrt(1 + n_g * theta)``, so every
evaluation of the profile is one QR least-squares fit on transformed data.

The REML criterion is profiled over ``s2_e`` and beta and maximised over
``log theta`` by golden-section search. The ``log|X'X|`` term is included so
the criterion does not depend on how the fixed-effect columns are scaled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .dataio import GroupedDataset, ModelSpec, build_design
from .distributions import f_sf, t_quantile
from .effectsize import EffectSizeReport, _guard, classify, BenchmarkConfig
from .errors import InputError, NumericalError, RankDeficiencyError
from .regression import RANK_TOL, CoefficientInterval, _dependent_set

LOG_THETA_BOUNDS = (-12.0, 12.0)
GOLDEN_TOL = 1e-8
MAX_ITER = 300
DEFINITIONS = ("total-variance", "residual-variance")

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LmmFit:
    fixed_coefficients: np.ndarray
    std_errors: np.ndarray
    sigma2_u: float
    sigma2_e: float
    reml_loglik: float
    n_groups: int
    converged: bool
    log_theta: float
    n: int
    names: tuple[str, ...]
    cov_fixed: np.ndarray
    iterations: int = 0

    @property
    def theta(self) -> float:
        return self.sigma2_u / self.sigma2_e

    @property
    def total_variance(self) -> float:
        return self.sigma2_u + self.sigma2_e


@dataclass(frozen=True)
class PseudoR2:
    value: float
    definition_tag: str


class _Profile:
    """Profiled REML for one design and grouping."""

    def __init__(self, X, y, codes, names):
        self.X, self.y = X, y
        self.codes = codes
        self.counts = np.bincount(codes).astype(float)
        self.n, self.p = X.shape
        self.names = names
        self.scale = np.linalg.norm(X, axis=0)
        if np.any(self.scale == 0):
            raise RankDeficiencyError("all-zero design column", [names[j] for j in np.flatnonzero(self.scale == 0)])
        self.Xs = X / self.scale
        # log|X'X| of the equilibrated design, for the reparametrisation-invariant REML
        _, R0 = np.linalg.qr(self.Xs)
        d = np.abs(np.diag(R0))
        bad = np.flatnonzero(d < RANK_TOL * d.max())
        if bad.size:
            cols = [names[j] for j in _dependent_set(R0, int(bad[0]), 1e-6)]
            raise RankDeficiencyError(f"singular fixed-effects design: {', '.join(cols)}", cols)
        self.logdet_xtx = 2.0 * float(np.log(d).sum())
        self.df = self.n - self.p
        if self.df < 1:
            raise InputError("more fixed effects than observations")

    def _whiten(self, A, theta):
        if theta == 0.0:
            return A
        c = 1.0 - 1.0 / np.sqrt(1.0 + self.counts * theta)
        if A.ndim == 1:
            means = np.bincount(self.codes, weights=A) / self.counts
            return A - (c * means)[self.codes]
        sums = np.zeros((len(self.counts), A.shape[1]))
        np.add.at(sums, self.codes, A)
        means = sums / self.counts[:, None]
        return A - (c[:, None] * means)[self.codes]

    def solve(self, theta):
        """(loglik, beta, R, sigma2_e) at ``theta``."""
        Xw = self._whiten(self.Xs, theta)
        yw = self._whiten(self.y, theta)
        Q, R = np.linalg.qr(Xw)
        beta_s = solve_triangular(R, Q.T @ yw)
        r = yw - Xw @ beta_s
        rss = float(r @ r)
        sigma2 = rss / self.df
        logdet_h = float(np.log1p(self.counts * theta).sum())
        logdet_xhx = 2.0 * float(np.log(np.abs(np.diag(R))).sum())
        ll = -0.5 * (
            self.df * (math.log(2.0 * math.pi * sigma2) + 1.0)
            + logdet_h
            + logdet_xhx
            - self.logdet_xtx
        )
        return ll, beta_s, R, sigma2

    def loglik(self, log_theta):
        return self.solve(math.exp(log_theta))[0]


def golden_section_max(f, lo, hi, tol=GOLDEN_TOL, max_iter=MAX_ITER):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x), iterations)``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for it in range(1, max_iter + 1):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    else:
        raise NumericalError(f"REML search did not converge in {max_iter} iterations")
    x = 0.5 * (a + b)
    return x, f(x), it


def _fit(X, y, codes, names, bounds=LOG_THETA_BOUNDS) -> LmmFit:
    prof = _Profile(X, y, codes, names)
    lo, hi = bounds
    x, _, iters = golden_section_max(prof.loglik, lo, hi)
    at_lower = x - lo <= 10 * GOLDEN_TOL
    at_upper = hi - x <= 10 * GOLDEN_TOL
    theta = math.exp(x)
    if at_lower and prof.solve(0.0)[0] >= prof.solve(theta)[0]:
        # boundary estimate: the group variance is zero
        theta = 0.0
    ll, beta_s, R, sigma2_e = prof.solve(theta)
    Rinv = solve_triangular(R, np.eye(prof.p))
    D = 1.0 / prof.scale
    cov = sigma2_e * (D[:, None] * (Rinv @ Rinv.T) * D[None, :])
    beta = beta_s * D
    return LmmFit(
        fixed_coefficients=beta,
        std_errors=np.sqrt(np.diag(cov)),
        sigma2_u=theta * sigma2_e,
        sigma2_e=sigma2_e,
        reml_loglik=ll,
        n_groups=len(prof.counts),
        converged=not (at_lower or at_upper),
        log_theta=math.log(theta) if theta > 0 else -math.inf,
        n=prof.n,
        names=tuple(names),
        cov_fixed=cov,
        iterations=iters,
    )


def fit_random_intercept(
    data: GroupedDataset, spec: ModelSpec, full: bool = True, bounds=LOG_THETA_BOUNDS
) -> LmmFit:
    """REML fit of the full (intercept + A + B) or reduced (intercept + A) model.

    ``converged`` is False when the optimum sits on a search bound; a lower-bound
    optimum is reported as ``sigma2_u = 0`` when the criterion at zero is at
    least as high.
    """
    ds = data.base
    if data.group_column in (spec.response, *spec.focal, *spec.covariates):
        raise InputError(f"group column {data.group_column!r} cannot also be a model variable")
    X_A, X_AB, y = build_design(ds, spec)
    X = X_AB if full else X_A
    names = spec.names_full() if full else spec.names_reduced()
    if ds.n_rows < 3 * (X.shape[1] + 2):
        raise InputError(
            f"need at least {3 * (X.shape[1] + 2)} rows for {X.shape[1]} fixed effects and 2 variances"
        )
    return _fit(X, y, data.group_index, names, bounds)


def fit_null(data: GroupedDataset, response: str, bounds=LOG_THETA_BOUNDS) -> LmmFit:
    """Intercept-only model with a random intercept."""
    y = data.base.column(response)
    X = np.ones((len(y), 1))
    return _fit(X, y, data.group_index, ("(Intercept)",), bounds)


def pseudo_r2(model: LmmFit, null: LmmFit, definition: str = "total-variance") -> PseudoR2:
    if definition == "total-variance":
        value = 1.0 - model.total_variance / null.total_variance
    elif definition == "residual-variance":
        value = 1.0 - model.sigma2_e / null.sigma2_e
    else:
        raise InputError(f"unknown pseudo-R² definition {definition!r}; use one of {DEFINITIONS}")
    return PseudoR2(value, definition)


def lmm_local_f2(
    data: GroupedDataset,
    spec: ModelSpec,
    definition: str = "total-variance",
    benchmarks: BenchmarkConfig = BenchmarkConfig(),
    level: float = 0.95,
) -> EffectSizeReport:
    """Local f² of ``spec.focal`` from pseudo-R² of random-intercept models.

    The p-value is a Wald F test of the focal fixed effects with
    ``n - p_AB - 1`` denominator degrees of freedom, and the intervals use the
    same t reference; both are approximations and say so in the warnings.
    """
    if definition not in DEFINITIONS:
        raise InputError(f"unknown pseudo-R² definition {definition!r}; use one of {DEFINITIONS}")
    null = fit_null(data, spec.response)
    full = fit_random_intercept(data, spec, full=True)
    reduced = null if not spec.covariates else fit_random_intercept(data, spec, full=False)
    r2_A = 0.0 if not spec.covariates else pseudo_r2(reduced, null, definition).value
    r2_AB = pseudo_r2(full, null, definition).value
    f2 = (r2_AB - r2_A) / _guard(r2_AB)

    warnings = [
        "multilevel p-value: Wald F test with residual degrees of freedom (approximate)",
    ]
    if r2_AB < r2_A:
        warnings.append(
            "pseudo-R² decreased when adding the focal block; "
            "f² is negative and not interpretable as incremental variance"
        )
    for tag, fit in (("null", null), ("reduced", reduced), ("full", full)):
        if not fit.converged and fit.sigma2_u > 0:
            warnings.append(f"{tag} model: REML optimum on the search bound")

    n, q, p_AB = data.base.n_rows, len(spec.focal), spec.p_full
    df2 = n - p_AB - 1
    if df2 < 2:
        raise InputError("too few rows for the focal Wald test")
    k = len(spec.covariates) + 1
    b = full.fixed_coefficients[k:]
    cov_B = full.cov_fixed[k:, k:]
    F = float(b @ np.linalg.solve(cov_B, b)) / q
    p = f_sf(F, q, df2)
    tcrit = t_quantile(0.5 * (1.0 + level), df2)
    intervals = [
        CoefficientInterval(name, float(c - tcrit * s), float(c + tcrit * s))
        for name, c, s in zip(full.names, full.fixed_coefficients, full.std_errors)
    ]
    return EffectSizeReport(
        variant="multilevel",
        f2_global=(r2_AB / _guard(r2_AB)) if r2_AB >= 0 else None,
        f2_local=f2,
        label=classify(f2, benchmarks),
        F_stat=F,
        p_exact=p,
        coefficient_intervals=intervals,
        r2_A=r2_A,
        r2_AB=r2_AB,
        q=q,
        n=n,
        p_AB=p_AB,
        df=(q, df2),
        interval_level=level,
        definition_tag=definition,
        extras={
            "focal": list(spec.focal),
            "covariates": list(spec.covariates),
            "group_column": data.group_column,
            "n_groups": full.n_groups,
            "sigma2_u": {"null": null.sigma2_u, "reduced": reduced.sigma2_u, "full": full.sigma2_u},
            "sigma2_e": {"null": null.sigma2_e, "reduced": reduced.sigma2_e, "full": full.sigma2_e},
            "reml_loglik": {"null": null.reml_loglik, "reduced": reduced.reml_loglik, "full": full.reml_loglik},
            "converged": {"null": null.converged, "reduced": reduced.converged, "full": full.converged},
            "negative_f2_not_interpretable": f2 < 0,
        },
        warnings=tuple(warnings),
    )

