"""Exception types shared across the herding control library."""

from __future__ import annotations


class HerdingError(Exception):
    """Base class for all errors raised by this library."""


class CollisionSingularity(HerdingError):
    """A herder sits on top of an evader, where the repulsion models blow up."""


class DimensionMismatch(HerdingError):
    """Vector or matrix shapes are inconsistent with the herd layout."""


class SingularSystem(HerdingError):
    """A linear system required by a controller is numerically singular."""


class NonSymmetricInput(HerdingError):
    """A gain matrix that must be symmetric is not."""


class NotSettled(HerdingError):
    """The tracking error never stays inside the requested band."""


class SchemaError(HerdingError):
    """A scenario document is structurally invalid.

    ``field`` holds the dotted path of the offending entry, e.g. ``sim.T``.
    """

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class InvariantViolation(HerdingError):
    """A value breaks a model or controller invariant (range, definiteness, count)."""
