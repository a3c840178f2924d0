"""Exception hierarchy shared across the package."""


class LpAlexError(Exception):
    """Base class for all package errors."""


class DimensionUnsupported(LpAlexError, ValueError):
    pass


class DegenerateHull(LpAlexError):
    """The points ±rho_i u_i do not span the ambient space."""


class InvalidP(LpAlexError, ValueError):
    pass


class QuadratureNotConverged(LpAlexError, RuntimeError):
    pass


class DegenerateInput(LpAlexError, ValueError):
    """The measure is concentrated on a great subsphere."""


class EmptyCurvature(LpAlexError):
    pass


class SpanningViolated(LpAlexError, ValueError):
    pass


class InadmissibleT(LpAlexError, ValueError):
    pass


class ParseError(LpAlexError, ValueError):
    pass


class ValidationError(LpAlexError, ValueError):
    pass


class Unresolvable(LpAlexError):
    """K^t is too thin for the hull and its normal fan to be resolved."""
