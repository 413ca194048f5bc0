"""Exception types raised across the toolchain.

Plain I/O failures (missing files, unwritable directories) are reported
with the builtin :class:`OSError`; everything domain-specific derives
from :class:`DqError` so callers can catch one base class.
"""

from __future__ import annotations


class DqError(Exception):
    """Base class for all toolchain errors."""


class ParseError(DqError):
    """A manifest, frame record or detection file is malformed.

    Carries file path and, where applicable, the offending line number
    so batch jobs can point at the exact record.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class ValidationError(DqError):
    """One or more invariant violations, collected rather than first-failure."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{len(self.problems)} validation problem(s):\n{lines}")


class FormatError(DqError):
    """A binary payload does not match its declared record layout."""


class OutOfFov(DqError):
    """An angle falls outside the camera's horizontal field of view."""


class MissingImage(DqError):
    """A camera view has no image available for pixel-level work."""


class DecodeError(DqError):
    """An image file exists but cannot be decoded."""


class NotComparable(DqError):
    """Cosine similarity is undefined (a crop vector has zero norm)."""


class DegenerateBox(DqError):
    """A box with zero area/volume where a positive measure is required."""


class FrameMismatch(DqError):
    """Two detection sets that must describe the same frame do not."""


class EmptyBaseline(DqError):
    """A ratio over the baseline detection set has an empty denominator."""


class InsufficientData(DqError):
    """A statistical test was handed fewer samples than it needs."""


class ZeroVariance(DqError):
    """Both sample groups are constant; the t statistic is undefined."""


class DegeneratePartition(DqError):
    """A grouping step produced an empty side."""


class SpecError(DqError):
    """A synthetic-scene specification is internally inconsistent."""
