"""Exception types raised by the library."""


class MaxMarginError(Exception):
    """Base class for library errors."""


class DegenerateModelError(MaxMarginError, ValueError):
    """F vanishes numerically: the label model is degenerate."""


class DomainError(MaxMarginError, ValueError):
    """Point lies outside the domain where the fixed-point system is solvable."""


class BelowThresholdError(DomainError):
    """psi at or below the interpolation threshold."""


class NoInteriorMinimumError(MaxMarginError):
    """A convex one-dimensional minimization ran off to infinity."""


class SolverFailure(MaxMarginError, RuntimeError):
    """An iterative solver did not converge.

    ``diagnostics`` carries whatever state helps locate the failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class BoundaryDegeneracyError(SolverFailure):
    """Wide-limit minimizer reached the boundary of the unit disk."""


class NonSeparableError(MaxMarginError):
    """The sample is not linearly separable."""


class PurelyLinearActivationError(MaxMarginError, ValueError):
    """Activation has no nonlinear component."""


class NumericConsistencyError(MaxMarginError, ArithmeticError):
    """A quantity that must be positive came out non-positive."""
