"""Exception types shared across the package."""


class TurboError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(TurboError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(TurboError):
    """Input outside the mathematical domain of an operation."""


class GraphError(TurboError):
    """Invalid use of the compute graph (e.g. backward on a non-scalar)."""


class GeometryError(TurboError):
    """Video / patch geometry mismatch."""


class ConstraintError(TurboError):
    """A declared model constraint was violated (e.g. r > m)."""


class ConfigError(TurboError):
    """Invalid configuration value or combination."""


class DataError(TurboError):
    """Invalid data passed to a dataset or evaluation routine."""
