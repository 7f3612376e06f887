"""Exception types shared across the package."""


class DsmpaError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DsmpaError, ValueError):
    """Invalid sizes, bit lengths or scenario settings."""


class DomainError(DsmpaError, ValueError):
    """Argument outside the domain an operation is defined on."""


class DetectionError(DsmpaError, ValueError):
    """Matrix or observation that cannot be mapped back to a codeword."""


class SingularityError(DomainError):
    """Geometry that makes the path-loss model diverge."""


class NumericalError(DsmpaError, ArithmeticError):
    """Ill-conditioned linear algebra in the analytical bound."""
