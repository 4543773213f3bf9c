"""Exception types raised across the package."""


class CipError(RuntimeError):
    """Base class for solver failures that are not input errors."""


class InfeasibleError(CipError):
    """The LP polytope (or the integral feasible set under a cap) is empty."""


class UnboundedError(CipError):
    pass


class ResampleCapExceeded(CipError):
    """More resampling events than the safety cap allows."""


class AttemptsExhausted(CipError):
    """The Markov-retry loop never met its acceptance threshold."""


class BudgetExceeded(CipError):
    """Brute-force search space larger than the configured budget."""


class NoFixedPoint(CipError):
    """The knapsack-cover cutting-plane loop hit its iteration cap."""
