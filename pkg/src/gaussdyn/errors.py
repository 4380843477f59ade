"""Exception and warning types raised by gaussdyn."""


class GaussdynError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteInputError(GaussdynError, ValueError):
    """An input contained NaN or infinity."""


class PreconditionError(GaussdynError, ValueError):
    """An operation was called outside the regime where it is defined."""


class EnvironmentConstraintError(GaussdynError):
    """An environment violates its positivity constraints.

    The offending :class:`~gaussdyn.model.ValidationResult` is kept on
    ``self.result`` so callers can print every violated constraint.
    """

    def __init__(self, result, message=None):
        self.result = result
        super().__init__(message or result.describe())


class UnphysicalStateError(GaussdynError):
    """A covariance matrix violates the two-mode uncertainty relation."""

    def __init__(self, report, message=None):
        self.report = report
        if message is None:
            nu_minus = report.symplectic_eigenvalues[0]
            message = (f"covariance is unphysical: smallest symplectic eigenvalue "
                       f"nu_- = {nu_minus:.6g} < 1/2")
        super().__init__(message)


class NumericalError(GaussdynError, ArithmeticError):
    """A computation failed or two independent routes disagreed."""


class ConfigError(GaussdynError):
    """A run configuration could not be parsed or is inconsistent."""


class BoundaryNegativityWarning(RuntimeWarning):
    """f(sigma) fell in the roundoff band around zero and was clamped."""


class CoarseGridWarning(RuntimeWarning):
    """A sampling cell holds more than one sign change of S(t)."""
