"""Exception types shared across the stitching engine."""

from __future__ import annotations


class StitchError(Exception):
    """Base class for all engine errors."""


class ParseError(StitchError):
    """Correspondence file is not valid JSON or misses required fields."""


class ValidationError(StitchError):
    """A correspondence record violates an invariant.

    Carries the index of the offending record so callers can point at the
    exact entry in the input file.
    """

    def __init__(self, message: str, record: int | None = None):
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
        self.record = record


class RankDeficient(StitchError):
    """Weighted DLT system has fewer than 8 effectively independent rows.

    Callers estimating a local homography should fall back to the global
    one fitted over all features.
    """


class AtInfinity(StitchError):
    """Homogeneous projection produced a w-component too close to zero."""


class DegenerateGeometry(StitchError):
    """Anchor set cannot be triangulated (collinear, coincident, or too few)."""


class Disconnected(StitchError):
    """Source and sink fell into different graph components."""


class OutOfMesh(StitchError):
    """Query point lies outside the mesh bounds."""


class SingularSystem(StitchError):
    """Mesh energy system could not be factorized."""


class EmptyOverlap(StitchError):
    """Warped target and reference share no canvas pixels."""


class NoAnchor(StitchError):
    """One side of the overlap boundary has no anchor pixels."""


class StageFailure(StitchError):
    """Wraps a module error with the pipeline stage (and hypothesis) it hit."""

    def __init__(self, stage: str, cause: Exception, hypothesis: int | None = None):
        where = stage if hypothesis is None else f"{stage}[hypothesis {hypothesis}]"
        super().__init__(f"{where}: {cause}")
        self.stage = stage
        self.hypothesis = hypothesis
        self.cause = cause


class FoldedCellWarning(UserWarning):
    """A deformed mesh cell inverted; it was rendered by its triangle halves."""
