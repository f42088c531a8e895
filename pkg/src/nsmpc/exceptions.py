"""Exception hierarchy shared by the solver modules."""


class NsmpcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(NsmpcError, ValueError):
    pass


class CapabilityError(NsmpcError):
    """A regularizer or residual variant lacks the requested operation."""


class DivergenceError(NsmpcError, FloatingPointError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class JacobianError(NsmpcError, FloatingPointError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class SingularMatrixError(NsmpcError, ArithmeticError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(NsmpcError):
    """Newton initialization stopped before reaching its tolerance."""

    def __init__(self, message, best_residual=None, best_z=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_z = best_z


class ConfigError(NsmpcError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
