"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class RandcpError(Exception):
    """Base class for errors raised by randcp."""


class InvalidInputError(RandcpError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateMomentError(RandcpError, ValueError):
    """A moment point lies outside the admissible region of the model.

    Raised for instance when a segment of a mean/variance series has zero
    (or numerically zero) variance, so the dual function is undefined.
    """


class DegenerateSeriesError(RandcpError, ValueError):
    """No admissible split exists, or the pooled fit itself is degenerate."""
