"""Exception hierarchy.

Every library error derives from :class:`AssimError` and exposes a stable
machine-readable ``code`` (the class name) so front ends can map failures to
exit codes and single-line diagnostics without string matching.
"""

from __future__ import annotations


class AssimError(Exception):
    """Base class for all domain errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


# -- domain type / parameter validation ------------------------------------

class InvalidSpec(AssimError):
    """A domain value violates its declared invariants."""


class InvalidK(AssimError):
    """Selection percentage outside (0, 100]."""


class InvalidAlpha(AssimError):
    """Mixture coefficient outside [0, 1]."""


class InvalidSizes(AssimError):
    """Malformed subset-size specification."""


# -- audience tables --------------------------------------------------------

class NegativeAudience(AssimError):
    """An audience count is negative (corrupt input)."""


class EmptyTable(AssimError):
    """An audience table carries no entries."""


class TotalMismatch(AssimError):
    """A table's claimed total disagrees with the sum of its entries."""


class EmptyIntersection(AssimError):
    """The three populations share no interest ids."""


class UniverseMismatch(AssimError):
    """Two ratio maps do not cover the same interest universe."""


# -- ingestion ---------------------------------------------------------------

class ParseError(AssimError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IoError(AssimError):
    """File could not be read or written."""


class ProviderUnavailable(AssimError):
    """Provider kept failing after the configured number of attempts."""


class ContractViolation(AssimError):
    """Provider response does not conform to the wire contract."""


# -- scoring -----------------------------------------------------------------

class ZeroTotalAudience(AssimError):
    """All counts in a table are zero; ratios are undefined."""


class NoDistinctiveInterests(AssimError):
    """No interest has a strictly larger destination ratio than home ratio."""


class EmptyScores(AssimError):
    """Median of an empty score set requested."""


# -- analysis ----------------------------------------------------------------

class SizeExceedsUniverse(AssimError):
    """Requested subset size is larger than the aligned universe."""


class MissingArea(AssimError):
    """Per-area normalization requested but the series has no areas."""


class NonPositiveArea(AssimError):
    """A region area is zero or negative."""


class LengthMismatch(AssimError):
    """Two region series have different lengths."""


class RegionMismatch(AssimError):
    """Two region series do not cover the same regions."""


class ConstantSeries(AssimError):
    """Correlation of a constant series is undefined."""


# -- synthesis ---------------------------------------------------------------

class DegenerateDraw(AssimError):
    """Generator repeatedly produced identical base share vectors."""
