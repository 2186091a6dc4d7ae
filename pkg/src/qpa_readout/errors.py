"""Exception hierarchy shared across the package."""


class QpaReadoutError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(QpaReadoutError, ValueError):
    """Invalid device, pump, or drive parameters."""


class ThresholdError(QpaReadoutError, ValueError):
    """Pump strength at or above the parametric threshold lambda = kappa/2."""


class ConfigError(QpaReadoutError):
    """Malformed or inconsistent configuration input."""


class TruncationError(QpaReadoutError):
    """Fock-space truncation failed the occupancy guard even after escalation."""


class ConvergenceError(QpaReadoutError):
    """An iterative extraction (integrator, slope fit, MLE fit) did not converge."""


class EfficiencyUndefinedError(QpaReadoutError, ZeroDivisionError):
    """Efficiency requested at a point where the dephasing rate vanishes."""
