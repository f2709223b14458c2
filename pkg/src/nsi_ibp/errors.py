"""Exception hierarchy shared by all modules."""


class NsiIbpError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(NsiIbpError, ValueError):
    pass


class EvaluationError(NsiIbpError, ArithmeticError):
    """An integrand produced a non-finite value."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class SingularityLeakError(EvaluationError):
    """A residual integrand is not finite near a singular endpoint."""


class DomainError(NsiIbpError, ValueError):
    pass


class LogDomainError(DomainError):
    pass


class DivergenceError(NsiIbpError, ArithmeticError):
    pass


class UnsolvableRelationError(NsiIbpError, ArithmeticError):
    pass


class UnsupportedWeightError(NsiIbpError, ValueError):
    pass


class RegimeError(NsiIbpError, ValueError):
    pass


class UnresolvableSingularityError(NsiIbpError, ArithmeticError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ConfigurationError(NsiIbpError, ValueError):
    pass
