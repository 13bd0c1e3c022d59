"""Exception hierarchy. Each family maps to one CLI exit code."""


class EffectSizeError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class InputError(EffectSizeError, ValueError):
    """Bad input data, malformed CSV, or an invalid model specification."""

    exit_code = 2


class NumericalError(EffectSizeError, ArithmeticError):
    """A computation that cannot produce a meaningful number."""

    exit_code = 3


class RankDeficiencyError(NumericalError):
    """Design matrix is (numerically) rank deficient.

    ``columns`` names the linearly dependent set that was detected.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class DenominatorGuardError(NumericalError):
    """1 - R² is too small for an f² ratio to be meaningful."""


class OracleError(EffectSizeError, RuntimeError):
    """A prediction oracle misbehaved (handshake, row count, non-finite output)."""

    exit_code = 4
