"""Exception types and diagnostic codes shared across the package.

Every domain error carries a stable machine-readable ``code`` string so
callers (and the CLI) can branch on failures without parsing messages.
"""

from __future__ import annotations

from dataclasses import dataclass


class ViewfitError(Exception):
    """Base error with a stable code string."""

    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class ParseError(ViewfitError):
    """Malformed input file; fatal for the whole ingestion."""

    code = "PARSE_ERROR"

    def __init__(self, message: str, locus: str = ""):
        self.locus = locus
        super().__init__(f"{message} [{locus}]" if locus else message)


class NegativeIncrementError(ViewfitError):
    code = "NEGATIVE_INCREMENT"


class DegenerateZeroViewsError(ViewfitError):
    code = "DEGENERATE_ZERO_VIEWS"


class DegenerateZeroAgeError(ViewfitError):
    code = "DEGENERATE_ZERO_AGE"


class SingularParamsError(ViewfitError):
    code = "SINGULAR_PARAMS"


class DomainError(ViewfitError):
    code = "DOMAIN_ERROR"


class ZeroVarianceError(ViewfitError):
    code = "ZERO_VARIANCE"


class BadInitialPointError(ViewfitError):
    code = "BAD_INITIAL_POINT"


class ShapeError(ViewfitError):
    code = "SHAPE_ERROR"


class InsufficientDfError(ViewfitError):
    code = "INSUFFICIENT_DF"


class TooShortError(ViewfitError):
    code = "TOO_SHORT"


class TooShortForClassificationError(ViewfitError):
    code = "TOO_SHORT_FOR_CLASSIFICATION"


class NoCandidatesError(ViewfitError):
    code = "NO_CANDIDATES"


class EmptyFutureError(ViewfitError):
    code = "EMPTY_FUTURE"


class NoEligibleRecordsError(ViewfitError):
    code = "NO_ELIGIBLE_RECORDS"


@dataclass(frozen=True)
class Diagnostic:
    """Per-record problem report produced during ingestion or batch runs.

    Rejected records are reported, never silently dropped.
    """

    record_id: str
    code: str
    message: str
    locus: str = ""

    def __str__(self) -> str:
        loc = f" at {self.locus}" if self.locus else ""
        return f"[{self.code}] {self.record_id}{loc}: {self.message}"
