"""Exception types shared across the package."""


class SolverError(Exception):
    """Base class for all stefanrf errors."""


class ConfigurationError(SolverError, ValueError):
    """Invalid user-supplied configuration (ranges, counts, weights, ...)."""


class ShapeError(SolverError, ValueError):
    """Array arguments with incompatible dimensions."""


class CapabilityError(SolverError):
    """A derivative order or condition form the implementation does not cover."""


class SamplingError(SolverError):
    """Rejection sampling exhausted its attempt budget (degenerate geometry)."""


class NumericalError(SolverError):
    """Linear-algebra failure (SVD/eigensolve did not converge)."""


class DivergenceError(NumericalError):
    """Optimization produced a non-finite loss.

    Carries the last parameter vector with a finite loss so callers can
    salvage partial results.
    """

    def __init__(self, message, last_params=None):
        super().__init__(message)
        self.last_params = last_params


class DomainError(SolverError, ValueError):
    """Argument outside a special function's domain."""
