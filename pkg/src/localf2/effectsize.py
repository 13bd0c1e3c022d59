"""Global and local Cohen's f², benchmark labels, shrinkage R² and the
incremental F test.

Notation: ``A`` is the covariate set, ``B`` the focal block. ``r2_A`` belongs
to the reduced model (intercept + A), ``r2_AB`` to the full model
(intercept + A + B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .dataio import Dataset, ModelSpec, build_design
from .distributions import f_sf
from .errors import DenominatorGuardError, InputError, NumericalError
from .regression import CoefficientInterval, coefficient_intervals, fit_ols

#: smallest admissible 1 - R² in an f² denominator
DENOMINATOR_GUARD = 1e-12
#: nested fits whose R² values disagree by less than this are treated as equal
NESTING_SLACK = 1e-12
OLKIN_PRATT_TERMS = 7

LABELS = ("below-small", "small", "medium", "large")


@dataclass(frozen=True)
class BenchmarkConfig:
    """Cohen's reference points for f². Boundaries classify upward."""

    small: float = 0.02
    medium: float = 0.15
    large: float = 0.35

    def __post_init__(self):
        if not 0 < self.small < self.medium < self.large:
            raise InputError("benchmarks must satisfy 0 < small < medium < large")

    @classmethod
    def parse(cls, text: str) -> "BenchmarkConfig":
        """From ``"s,m,l"``."""
        try:
            s, m, l = (float(v) for v in text.split(","))
        except ValueError:
            raise InputError(f"--benchmarks expects three comma-separated numbers, got {text!r}") from None
        return cls(s, m, l)


@dataclass(frozen=True)
class ModelComparison:
    """The inputs of the local f² formula.

    ``nested=False`` marks an externally supplied R² pair (non-nested or
    cross-fitted models); only then may ``r2_A`` exceed ``r2_AB``.
    """

    r2_A: float
    r2_AB: float
    q: int
    n: int
    p_AB: int
    nested: bool = True

    def __post_init__(self):
        for name in ("r2_A", "r2_AB"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v <= 1.0):
                raise InputError(f"{name} must be a finite value ≤ 1, got {v!r}")
        if self.nested and not (0.0 <= self.r2_A and 0.0 <= self.r2_AB):
            raise InputError("R² of a nested least-squares fit cannot be negative")
        if self.nested and self.r2_A > self.r2_AB:
            raise NumericalError(
                f"r2_A ({self.r2_A!r}) exceeds r2_AB ({self.r2_AB!r}); the models are not nested"
            )
        if self.q < 1 or self.p_AB < self.q:
            raise InputError("need 1 ≤ q ≤ p_AB")
        if self.df_residual < 2:
            raise InputError(
                f"n - p_AB - 1 = {self.df_residual} residual degrees of freedom; at least 2 required"
            )

    @property
    def df_residual(self) -> int:
        return self.n - self.p_AB - 1


def _guard(r2: float) -> float:
    denom = 1.0 - r2
    if not denom >= DENOMINATOR_GUARD:
        raise DenominatorGuardError(
            f"R² too close to 1 (1 - R² = {denom:.3e} < {DENOMINATOR_GUARD:g}); "
            "f² is not meaningful when the unexplained variance vanishes"
        )
    return denom


def global_f2(r2: float) -> float:
    """``R² / (1 - R²)``."""
    if not 0.0 <= r2 <= 1.0:
        raise InputError(f"R² must lie in [0, 1], got {r2!r}")
    return r2 / _guard(r2)


def local_f2(r2_A: float, r2_AB: float, nested: bool = True) -> float:
    """``(R²_AB - R²_A) / (1 - R²_AB)``.

    With ``nested=True`` (the default) a reduced-model R² above the full-model
    one is an error. Externally supplied pairs pass ``nested=False`` and may
    yield a negative value.
    """
    if not (r2_A <= 1.0 and r2_AB <= 1.0):
        raise InputError("R² values must not exceed 1")
    if nested:
        if not (0.0 <= r2_A and 0.0 <= r2_AB):
            raise InputError("R² of a nested least-squares fit cannot be negative")
        if r2_A > r2_AB:
            raise NumericalError(
                f"r2_A ({r2_A!r}) exceeds r2_AB ({r2_AB!r}); the models are not nested"
            )
    return (r2_AB - r2_A) / _guard(r2_AB)


def classify(f2: float, benchmarks: BenchmarkConfig = BenchmarkConfig()) -> str:
    if not math.isfinite(f2):
        raise InputError(f"cannot classify non-finite f² {f2!r}")
    if f2 >= benchmarks.large:
        return "large"
    if f2 >= benchmarks.medium:
        return "medium"
    if f2 >= benchmarks.small:
        return "small"
    return "below-small"


def _hyp2f1_11(c: float, z: float, terms: int) -> float:
    # 2F1(1, 1; c; z) = sum_k k! z^k / (c)_k
    total, term = 1.0, 1.0
    for k in range(1, terms):
        term *= k * z / (c + k - 1)
        total += term
    return total


def adjusted_r2(r2: float, n: int, p: int, method: str = "ezekiel") -> float:
    """Shrinkage-corrected R².

    ``ezekiel``: ``1 - (1 - R²)(n - 1)/(n - p - 1)``.

    ``olkin_pratt``: ``1 - (n - 3)/(n - p - 1) · (1 - R²) · 2F1(1, 1; (n - p + 1)/2; 1 - R²)``
    with the hypergeometric series cut after seven terms.
    """
    df = n - p - 1
    if df < 2:
        raise InputError(f"n - p - 1 = {df}; at least 2 residual degrees of freedom required")
    if not 0.0 <= r2 <= 1.0:
        raise InputError(f"R² must lie in [0, 1], got {r2!r}")
    z = 1.0 - r2
    if method == "ezekiel":
        return 1.0 - z * (n - 1) / df
    if method == "olkin_pratt":
        return 1.0 - (n - 3) / df * z * _hyp2f1_11(0.5 * (n - p + 1), z, OLKIN_PRATT_TERMS)
    raise InputError(f"unknown adjustment method {method!r}")


def incremental_f_test(cmp: ModelComparison) -> tuple[float, float]:
    """F statistic for the R² increment of block B and its exact upper-tail p."""
    df2 = cmp.df_residual
    denom = _guard(cmp.r2_AB)
    F = ((cmp.r2_AB - cmp.r2_A) / cmp.q) / (denom / df2)
    f2 = local_f2(cmp.r2_A, cmp.r2_AB, nested=cmp.nested)
    expect = f2 * df2 / cmp.q
    if abs(F - expect) > 1e-12 * max(abs(F), abs(expect)):
        raise NumericalError(f"F identity violated: {F!r} vs {expect!r}")
    p = f_sf(F, cmp.q, df2) if F > 0 else 1.0
    return F, p


@dataclass(frozen=True)
class EffectSizeReport:
    """Everything a reader needs to judge a focal block.

    ``variant`` is ``"ols"``, ``"multilevel"`` or ``"blackbox"``. Items that do
    not apply to a variant are ``None`` and rendered as "not applicable".
    """

    variant: str
    f2_global: Optional[float]
    f2_local: float
    label: str
    F_stat: Optional[float]
    p_exact: Optional[float]
    coefficient_intervals: Optional[list[CoefficientInterval]]
    r2_A: float
    r2_AB: float
    adj_r2: dict = field(default_factory=dict)
    q: int = 0
    n: int = 0
    p_AB: int = 0
    df: tuple = ()
    interval_level: float = 0.95
    ci_f2_local: Optional[tuple[float, float]] = None
    definition_tag: Optional[str] = None
    extras: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


def analyze(
    dataset: Dataset,
    spec: ModelSpec,
    benchmarks: BenchmarkConfig = BenchmarkConfig(),
    level: float = 0.95,
) -> EffectSizeReport:
    """Fit the reduced and full OLS models on the same rows and report f²."""
    X_A, X_AB, y = build_design(dataset, spec)
    if X_A.shape[0] != X_AB.shape[0]:
        raise InputError("reduced and full models would use different rows")
    fit_A = fit_ols(X_A, y, spec.names_reduced())
    fit_AB = fit_ols(X_AB, y, spec.names_full())
    n, p_AB, q = dataset.n_rows, spec.p_full, len(spec.focal)

    r2_A, r2_AB = fit_A.r2, fit_AB.r2
    warnings = []
    if r2_A > r2_AB:
        if r2_A - r2_AB > NESTING_SLACK:
            raise NumericalError("reduced model fits better than the full model; nesting broken")
        # rounding only: the increment is zero
        r2_A = r2_AB
    cmp = ModelComparison(r2_A, r2_AB, q, n, p_AB)
    F, p = incremental_f_test(cmp)
    f2 = local_f2(r2_A, r2_AB)
    if fit_AB.condition_estimate > 1e8:
        warnings.append(
            f"full design is ill-conditioned (condition estimate {fit_AB.condition_estimate:.3g})"
        )
    return EffectSizeReport(
        variant="ols",
        f2_global=global_f2(r2_AB),
        f2_local=f2,
        label=classify(f2, benchmarks),
        F_stat=F,
        p_exact=p,
        coefficient_intervals=coefficient_intervals(fit_AB, level),
        r2_A=r2_A,
        r2_AB=r2_AB,
        adj_r2={
            "ezekiel_A": adjusted_r2(r2_A, n, p_AB - q),
            "ezekiel_AB": adjusted_r2(r2_AB, n, p_AB),
            "olkin_pratt_A": adjusted_r2(r2_A, n, p_AB - q, "olkin_pratt"),
            "olkin_pratt_AB": adjusted_r2(r2_AB, n, p_AB, "olkin_pratt"),
        },
        q=q,
        n=n,
        p_AB=p_AB,
        df=(q, cmp.df_residual),
        interval_level=level,
        extras={
            "focal": list(spec.focal),
            "covariates": list(spec.covariates),
            "coefficients": [float(b) for b in fit_AB.coefficients],
            "std_errors": [float(s) for s in fit_AB.std_errors],
        },
        warnings=tuple(warnings),
    )
