"""Exception types raised across the package."""


class SharpEdgesError(Exception):
    """Base class for all package errors."""


class ParseError(SharpEdgesError):
    """A mesh, point cloud or edge file could not be parsed."""


class DegenerateMesh(SharpEdgesError):
    """The mesh has no usable faces or no spatial extent."""


class InsufficientNeighborhood(SharpEdgesError):
    """A vertex has too few neighbors for a local surface fit."""


class InvalidParam(SharpEdgesError, ValueError):
    """A parameter is outside its valid range."""


class OutOfRange(SharpEdgesError, ValueError):
    """A curve parameter lies outside the curve's domain."""


class DegenerateInput(SharpEdgesError):
    """Fitting input does not determine the requested model."""


class SingularSystem(DegenerateInput):
    """A least-squares system is not positive definite."""


class InsufficientPoints(DegenerateInput):
    """Too few points were supplied for the requested fit."""


class MissingChannel(SharpEdgesError):
    """A point cloud lacks a per-point channel required by an operation."""


class MissingCurvature(MissingChannel):
    """A point cloud lacks the curvature channels required by an operation."""


class ShapeMismatch(SharpEdgesError, ValueError):
    """Array arguments disagree in shape."""
