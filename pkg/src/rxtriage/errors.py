"""Exception types shared across the triage toolkit."""

from __future__ import annotations


class RxTriageError(Exception):
    """Base class for every error raised by this package."""


class TooFewPixels(RxTriageError):
    """Fewer training pixels than spectral bands."""


class SingularCovariance(RxTriageError):
    """Regularized covariance could not be inverted."""


class NonFiniteInput(RxTriageError):
    """NaN or infinity encountered in input data."""


class DimensionMismatch(RxTriageError):
    """Vector, cube, or image dimensions disagree."""


class CorrectionModeMismatch(RxTriageError):
    """Raw cube scored against a brightness-corrected model, or vice versa."""


class ParseError(RxTriageError):
    """Malformed manifest line, store line, or model document."""

    def __init__(self, message: str, path=None, line: int | None = None):
        super().__init__(message)
        self.path = path
        self.line = line


class MissingFile(RxTriageError):
    """A referenced file does not exist."""


class DecodeError(RxTriageError):
    """An image product failed to decode."""


class MissingPercentiles(RxTriageError):
    """Global normalization requested from a model without stored score percentiles."""


class EncodeError(RxTriageError):
    """Heat-map PNG encoding failed."""


class EmptyMap(RxTriageError):
    """Aggregation requested over a map with no pixels."""


class MixedModels(RxTriageError):
    """Ranking inputs were scored under different models."""


class IdSetMismatch(RxTriageError):
    """Rank comparison lists are not permutations of the same id set."""


class TooShort(RxTriageError):
    """Rank comparison needs at least two sequences."""
