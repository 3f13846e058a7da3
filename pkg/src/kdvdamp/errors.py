"""Exception hierarchy shared by all modules.

CLI exit codes: ConfigurationError -> 2, BlowupError -> 3,
FitDomainError / UndefinedRatioError -> 4.
"""


class KdvDampError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KdvDampError):
    """Invalid parameters, unsupported combinations, malformed config files."""


class SingularMatrixError(KdvDampError):
    """Zero or near-zero pivot in a banded factorization."""


class BlowupError(KdvDampError):
    """Simulation left the stable regime (energy blowup or non-finite values)."""

    def __init__(self, message, last_good_time=None):
        super().__init__(message)
        self.last_good_time = last_good_time


class FitDomainError(KdvDampError):
    """Decay fit requested on data it cannot represent (e.g. nonpositive energies)."""


class UndefinedRatioError(KdvDampError):
    """Weighted-ratio denominator annihilated by the exponential weight."""


class InternalError(KdvDampError):
    """Invariant violation that indicates a bug, not bad user input."""
