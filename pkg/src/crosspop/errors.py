"""Exception types shared across the package."""


class CrosspopError(Exception):
    """Base class for all package errors."""


class ValidationError(CrosspopError):
    """Raised when input data or configuration violates a documented contract."""


class FitError(CrosspopError):
    """Raised when a model fit cannot be completed."""


class SeparationError(FitError):
    """Raised when a binomial fit shows perfect separation (diverging coefficients)."""


class ConvergenceError(FitError):
    """Raised when an iterative solver exhausts its iteration budget."""


class NumericalError(CrosspopError):
    """Raised when a computation produces non-finite intermediate values."""
