"""Exception hierarchy shared by all modules.

Validation failures (bad dimensions, degenerate inputs, missing depth) are
distinct from I/O problems so the CLI can map them onto exit codes.
"""

from __future__ import annotations


class Edit3dError(Exception):
    """Base class for everything raised on purpose by this package."""


class ValidationError(Edit3dError):
    """An input violates a documented precondition or invariant."""


class DimensionError(ValidationError):
    """Raster/camera sizes that are required to agree do not."""


class DegenerateInputError(ValidationError):
    """Input carries no usable signal (e.g. constant or empty depth map)."""


class InsufficientOverlapError(ValidationError):
    """Fewer than two pixels are shared between the maps being aligned."""


class DegenerateAlignmentError(ValidationError):
    """Depth variance over the overlap is too small to fix a scale."""


class IncompleteDepthError(ValidationError):
    """A pixel that the operation needs has no valid depth.

    Carries the offending (u, v) pixel so the message can name it.
    """

    def __init__(self, u: int, v: int, detail: str = ""):
        self.pixel = (int(u), int(v))
        msg = f"no valid depth at pixel (u={u}, v={v})"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class EmptyMaskError(ValidationError):
    """A mask that must select at least one pixel selects none."""


class UndefinedMetricError(ValidationError):
    """A metric has an empty evaluation domain (e.g. zero unedited pixels)."""


class SceneSpecError(ValidationError):
    """A synthetic scene description is malformed or inconsistent."""


class StageError(Edit3dError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")
