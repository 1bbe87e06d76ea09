"""Exception hierarchy shared by every module."""


class KHError(Exception):
    """Base class for all engine errors."""


class DomainError(KHError, ValueError):
    """A cell or point lies outside the domain it is required to be in."""


class OverlapError(KHError, ValueError):
    """Two cells of a tagged family overlap with positive length."""


class TagError(KHError, ValueError):
    """A tag lies outside its cell."""


class NumericalFailure(KHError, ArithmeticError):
    """Base class for failures that map to CLI exit code 3."""


class DepthExceeded(NumericalFailure):
    """Bisection went deeper than the configured cap."""


class NoConvergence(NumericalFailure):
    """The refinement schedule hit its iteration cap without stabilising.

    ``best`` and ``error_estimate`` carry the last iterate.
    """

    def __init__(self, message, best=None, error_estimate=None):
        super().__init__(message)
        self.best = best
        self.error_estimate = error_estimate


class NonFiniteSample(NumericalFailure):
    """An integrand returned NaN or infinity at a non-singular tag."""

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = tuple(points)


class BudgetExceeded(KHError, RuntimeError):
    """A covering needed more families than the covering bound allows."""


class DomainMismatch(KHError, ValueError):
    """An integrand lives on a different cell than the operator expects."""


class NotIncreasing(KHError, ValueError):
    pass


class EndpointMismatch(KHError, ValueError):
    pass


class DegenerateOperator(KHError, ValueError):
    """T(1) integrates to (almost) zero, so no sign/map can be recovered."""


class ParseError(KHError, ValueError):
    def __init__(self, message, position, expected=()):
        super().__init__(f"{message} at offset {position}")
        self.position = position
        self.expected = tuple(expected)


class EvalError(KHError, ArithmeticError):
    pass
