"""Exception hierarchy shared by every module.

``ValidationError`` subclasses map to CLI exit code 2,
``ResourceBudgetExceeded`` to exit code 3.
"""

from __future__ import annotations


class AlignmentError(Exception):
    """Base class for all package errors."""


class ValidationError(AlignmentError, ValueError):
    """Input data violates a documented precondition or invariant."""


class NonPositiveDuration(ValidationError):
    def __init__(self, index: int | None, onset: float | None = None, offset: float | None = None):
        self.index = index
        where = "note" if index is None else f"note {index}"
        super().__init__(f"{where}: offset {offset} must be greater than onset {onset}")


class PitchOutOfRange(ValidationError):
    def __init__(self, index: int | None, pitch: int | None = None):
        self.index = index
        where = "note" if index is None else f"note {index}"
        super().__init__(f"{where}: pitch {pitch} outside [0, 127]")


class InvalidVelocity(ValidationError):
    def __init__(self, index: int | None, velocity: int | None = None):
        self.index = index
        where = "note" if index is None else f"note {index}"
        super().__init__(f"{where}: velocity {velocity} outside [0, 127]")


class TooFewAnchors(ValidationError):
    pass


class InvalidTimeMap(ValidationError):
    pass


class MalformedMidi(ValidationError):
    pass


class MalformedCsv(ValidationError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class MalformedJson(ValidationError):
    pass


class SchemaVersionMismatch(ValidationError):
    pass


class MalformedWav(ValidationError):
    pass


class UnsupportedEncoding(ValidationError):
    pass


class IoFailure(AlignmentError, OSError):
    pass


class InvalidFramePeriod(ValidationError):
    pass


class FramePeriodTooSmall(ValidationError):
    pass


class EmptySequence(ValidationError):
    pass


class EmptyMatrix(ValidationError):
    pass


class NegativeCost(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptyScore(ValidationError):
    pass


class TooFewMatches(ValidationError):
    pass


class TooFewNotes(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class EmptyList(ValidationError):
    pass


class InvalidHistogram(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class ResourceBudgetExceeded(AlignmentError):
    """A piece ran past its wall-clock or memory allowance."""
