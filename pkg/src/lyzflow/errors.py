"""Exception types raised by the simulator."""


class LyzError(Exception):
    """Base class for all simulator errors."""


class NonFiniteError(LyzError, FloatingPointError):
    """A field contains NaN or Inf."""


class NonZeroMean(LyzError, ValueError):
    """Poisson right-hand side is not mean-free (cohomology inconsistency)."""


class CohomologyMismatch(LyzError, ValueError):
    """The class of alpha_0 does not equal -lambda [omega_0]."""


class MetricDegenerate(LyzError):
    """The metric left the Kahler cone (smallest eigenvalue below threshold)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class KappaOne(LyzError, ValueError):
    """An identity that divides by (kappa - 1) was requested at kappa = 1."""


class KappaRange(LyzError, ValueError):
    """The comparison ODE needs kappa > 1."""


class KappaNotOne(LyzError, ValueError):
    """The enhanced-functional derivative formula only holds at kappa = 1."""


class NonPositiveTau(LyzError, ValueError):
    """tau must be strictly positive for the entropy functionals."""


class CflViolation(LyzError):
    """Explicit step size exceeds the diffusive stability limit."""


class ConfigError(LyzError, ValueError):
    """Malformed run configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
