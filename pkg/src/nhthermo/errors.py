"""Exception types shared across the package."""


class NhThermoError(Exception):
    """Base class for all package errors."""


class UsageError(NhThermoError):
    """Invalid arguments or mismatched dimensions (caller mistake)."""


class ValidationError(UsageError):
    """An object failed its construction invariants."""


class EigenSolverError(NhThermoError):
    """Eigensolver did not converge; carries the residual norm."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(NhThermoError):
    """Iterative solver ran out of iterations; carries the best residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AmbiguousSteadyStateError(NhThermoError):
    """Distinct initial states relaxed to distinct fixed points."""


class StiffnessError(NhThermoError):
    """Adaptive step-size underflow; carries the time stamp."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class PositivityError(NhThermoError):
    """A propagated state developed eigenvalues below the allowed floor."""


class AdiabaticityError(NhThermoError):
    """State failed to track the instantaneous steady state during a ramp."""


class ResolutionError(NhThermoError):
    """A grid was too coarse to resolve the requested feature."""
