"""Exception types raised by logistic_oed."""


class LogisticOEDError(Exception):
    """Base class for all package errors."""


class FactorizationFailed(LogisticOEDError):
    """A covariance or information matrix is not numerically positive definite."""


class NoConvergence(LogisticOEDError):
    """Every optimizer restart failed."""


class DegenerateVariance(LogisticOEDError):
    """Model output variance is too small to normalise a Sobol' index."""


class TimeNotInGrid(LogisticOEDError):
    """A requested design time is absent from the cached index grid."""


class InfeasibleConstraints(LogisticOEDError):
    """No design satisfies the spacing and horizon constraints."""


class TooFewRetained(LogisticOEDError):
    """Too few parameter samples passed the likelihood threshold."""


class ConfigError(LogisticOEDError):
    """Scenario configuration is invalid."""
