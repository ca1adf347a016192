"""Exception hierarchy shared by every stage of the toolkit."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all errors raised by eqcentre."""

    exit_code = 4


class InputError(ToolkitError):
    """Problem with user-supplied data or configuration."""

    exit_code = 2


class ValidationError(InputError, ValueError):
    """A value violates a documented invariant."""


class FormatError(InputError):
    """Text input does not follow the expected layout."""


class ConfigurationError(InputError):
    """A configuration key, column mapping or preset is invalid."""


class TransportError(ToolkitError):
    """Fetching remote data failed."""

    exit_code = 3


class NumericError(ToolkitError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class DomainError(NumericError, ValueError):
    """An argument lies outside the domain of a numerical routine."""


class DegeneracyError(NumericError):
    """Geometry is degenerate (collinear points, zero-length vectors, ...)."""


class AlignmentError(NumericError):
    """Two epoch-indexed series do not share the same epochs."""


class SegmentationError(NumericError):
    """Apsis detection or cycle segmentation failed."""


class EvaluationError(NumericError):
    """An expression references a variable the row does not bind."""


class FittingError(NumericError):
    """Constant fitting had no usable rows."""


class SearchError(NumericError):
    """Symbolic search produced no admissible candidate."""
