"""Exception types shared across the package.

The CLI maps these onto exit codes: parameter errors exit 1, numerical and
construction errors exit 2, I/O and format errors exit 3.
"""


class SpcaError(Exception):
    """Base class for all package errors."""


class ParameterError(SpcaError, ValueError):
    """A caller-supplied argument violates a precondition."""


class NumericalError(SpcaError, ArithmeticError):
    """A numerical routine failed to meet its accuracy contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConstructionError(SpcaError, RuntimeError):
    """An instance constructor or certificate check failed."""


class DeflationError(NumericalError):
    """Deflation produced a direction numerically inside the learned span."""


class FormatError(SpcaError, ValueError):
    """An input file does not conform to its declared format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
