"""Exception hierarchy shared by the estimation, sampling and CLI layers."""


class SpatialSignError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SpatialSignError, ValueError):
    """Input data or arguments violate a documented precondition."""


class InvalidParameterError(InvalidInputError):
    """A model or distribution parameter is outside its admissible range."""


class InsufficientSampleError(InvalidInputError):
    """Too few observations for the requested estimation mode."""


class DegenerateColumnError(InvalidInputError):
    """A variable is constant, so its scale cannot be estimated."""


class NumericalFailureError(SpatialSignError, ArithmeticError):
    """An iterate or factorization produced a non-finite or invalid value."""
