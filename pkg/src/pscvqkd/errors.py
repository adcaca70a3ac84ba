"""Exception types raised by the key-rate pipeline."""


class UnphysicalStateError(ValueError):
    """A covariance matrix violates the uncertainty principle.

    ``value`` holds the offending symplectic eigenvalue and ``params`` the
    effective parameters that produced the state, when known.
    """

    def __init__(self, message, value=None, params=None):
        super().__init__(message)
        self.value = value
        self.params = params


class NoClonerError(ValueError):
    """The entangling cloner is undefined for a lossless channel (T = 1)."""


class NoCorrelationError(ValueError):
    """The kept records carry no Alice-Bob correlation, so no key can be made."""


class RegionUnderflowError(ArithmeticError):
    """The post-selection region has probability below the representable floor."""


class OptimizationError(RuntimeError):
    """Every candidate evaluated by the optimizer was infeasible."""
