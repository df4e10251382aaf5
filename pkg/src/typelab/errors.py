"""Exception types shared across modules."""


class TypelabError(Exception):
    """Base class for all library errors."""


class ValidationError(TypelabError, ValueError):
    """Input violates an operation's precondition."""


class GridError(ValidationError):
    """A sampling grid is too coarse for the quantity being checked."""


class ZeroHit(TypelabError):
    """Evaluation point coincides with a zero of a product (the value is exactly 0)."""

    def __init__(self, zero):
        super().__init__(f"evaluation point is a zero of the product: {zero!r}")
        self.zero = zero


class ConditioningError(TypelabError):
    """A derivative or denominator is too small to be trusted."""


class IntegrationError(TypelabError):
    """Step-halving discrepancy of the ODE integrator exceeded tolerance."""


class InfeasibleError(TypelabError):
    """A construction search hit its cap without finding a feasible parameter."""
