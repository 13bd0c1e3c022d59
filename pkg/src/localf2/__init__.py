"""Global and local Cohen's f² effect sizes for regression-type models."""

__version__ = "0.1.0"

from .dataio import Dataset, GroupedDataset, ModelSpec, build_design, group_by, load_csv
from .distributions import f_sf, regularized_incomplete_beta, t_cdf, t_quantile
from .effectsize import (
    BenchmarkConfig,
    EffectSizeReport,
    ModelComparison,
    adjusted_r2,
    analyze,
    classify,
    global_f2,
    incremental_f_test,
    local_f2,
)
from .errors import (
    DenominatorGuardError,
    EffectSizeError,
    InputError,
    NumericalError,
    OracleError,
    RankDeficiencyError,
)
from .regression import LinearFit, coefficient_intervals, fit_ols

__all__ = [
    "BenchmarkConfig",
    "Dataset",
    "DenominatorGuardError",
    "EffectSizeError",
    "EffectSizeReport",
    "GroupedDataset",
    "InputError",
    "LinearFit",
    "ModelComparison",
    "ModelSpec",
    "NumericalError",
    "OracleError",
    "RankDeficiencyError",
    "adjusted_r2",
    "analyze",
    "build_design",
    "classify",
    "coefficient_intervals",
    "f_sf",
    "fit_ols",
    "global_f2",
    "group_by",
    "incremental_f_test",
    "load_csv",
    "local_f2",
    "regularized_incomplete_beta",
    "t_cdf",
    "t_quantile",
]
