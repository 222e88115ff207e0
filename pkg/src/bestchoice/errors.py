"""Exception types shared across the package.

Each carries an ``exit_code`` so the command line front end can map
failures to distinct process exit statuses.
"""


class BestChoiceError(Exception):
    exit_code = 1


class DataFormatError(BestChoiceError, ValueError):
    """Malformed input file (bad header, non-numeric cell, ragged row)."""

    exit_code = 3


class SingularCovariates(BestChoiceError, ValueError):
    """Covariance matrix is not safely invertible (collinear or constant columns)."""

    exit_code = 4


class InvalidArm(BestChoiceError, ValueError):
    """Treated-group size outside ``2 <= n1 <= n - 2``."""

    exit_code = 5


class UnitMismatch(BestChoiceError, ValueError):
    exit_code = 6


class ArmTooSmall(BestChoiceError, ValueError):
    """An arm has too few units for the within-arm regressions."""

    exit_code = 7


class ConfigError(BestChoiceError, ValueError):
    exit_code = 8


class DomainError(BestChoiceError, ValueError):
    """Argument outside the mathematical domain of a function."""

    exit_code = 9
