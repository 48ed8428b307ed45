"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to the
documented process status without a lookup table.
"""

from __future__ import annotations


class AlignmentError(ValueError):
    """Base class for all sspalign errors."""

    exit_code = 3

    @property
    def name(self) -> str:
        return type(self).__name__


# -- input / validation failures (exit 1) ---------------------------------


class InputError(AlignmentError):
    """Malformed input data. Carries an optional 1-based line number."""

    exit_code = 1

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.detail = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeader(InputError):
    pass


class UnparseableNumber(InputError):
    pass


class MalformedRow(InputError):
    pass


class DuplicateKey(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class UnknownScenario(InputError):
    pass


class InvalidDataset(InputError):
    pass


# -- configuration failures (exit 2) --------------------------------------


class ConfigError(AlignmentError):
    exit_code = 2


class MissingWeight(ConfigError):
    pass


class AllZeroWeights(ConfigError):
    pass


class NegativeWeight(ConfigError):
    pass


class NonPositiveTemperature(ConfigError):
    pass


class InvalidLambda(ConfigError):
    pass


# -- scoring failures (exit 3) --------------------------------------------


class MissingCoverage(AlignmentError):
    pass


class MissingStats(AlignmentError):
    pass


class MissingFeature(AlignmentError):
    pass


class ExtrapolationRequired(AlignmentError):
    pass


class DimensionMismatch(AlignmentError):
    pass


class InsufficientYears(AlignmentError):
    pass


class EmptyInput(AlignmentError):
    pass


class MissingScenario(AlignmentError):
    pass


class IncompleteRegion(AlignmentError):
    pass


class CoverageMismatch(AlignmentError):
    pass


class OrientationError(AlignmentError):
    pass
