"""Exception types shared across the toolkit.

Every error that a pipeline stage can surface to a caller maps onto one
of these classes so the command-line layer can translate them into
stable exit codes.
"""


class RwError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(RwError, ValueError):
    """Bad parameters or malformed input data."""


class BlowUpError(RwError, ArithmeticError):
    """The field became non-finite during time stepping."""

    def __init__(self, t: float, message: str = ""):
        self.t = float(t)
        super().__init__(message or f"field blew up near t = {t:.6g}")


class MeasurementError(RwError, RuntimeError):
    """A pattern statistic could not be computed from the given data."""


class InsufficientPeaksError(MeasurementError):
    """Too few detected peaks to support the requested estimate."""


class DegenerateGeometryError(MeasurementError):
    """Fitted pattern geometry has no usable angle or area."""


class FormatError(RwError, ValueError):
    """A file does not conform to the expected on-disk format."""
