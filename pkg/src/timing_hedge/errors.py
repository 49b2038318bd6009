"""Exception hierarchy shared by every module."""


class TimingHedgeError(Exception):
    """Base class for library errors."""


class DomainError(TimingHedgeError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(DomainError):
    """A caller-side precondition (e.g. a point on a hyperplane) does not hold."""


class ConfigError(TimingHedgeError, ValueError):
    """Invalid quadrature or Monte Carlo configuration."""


class UndefinedRatioError(TimingHedgeError, ArithmeticError):
    """The first order error is too small for the ratio to be meaningful."""


class ConsistencyError(TimingHedgeError, RuntimeError):
    """Internal cross-check of a computation failed."""


class QuadratureError(TimingHedgeError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    ``diagnostics`` carries whatever the integrator reported (subinterval
    count, error estimate, the offending interval).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
