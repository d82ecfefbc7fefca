"""Exception types shared across the package."""


class PolylabError(Exception):
    """Base class for all polylab errors."""


class ValidationError(PolylabError, ValueError):
    """Invalid input: bad parameter, malformed table, broken precondition."""


class DegenerateCoefficientError(PolylabError, ValueError):
    """An operation needs a nonzero leading (or constant) coefficient."""


class ZeroPolynomialError(PolylabError, ValueError):
    """The polynomial is identically zero."""


class UndefinedCorrelationError(PolylabError, ValueError):
    """Correlation requested at a point of zero variance."""


class PoleError(PolylabError, ValueError):
    """Integrand evaluated at a pole (c_0 = 0 at t = 0)."""


class WindowUndefinedError(PolylabError, ValueError):
    """Truncation window undefined: A_x = log 1/(1-x) must exceed 1."""


class DegeneratePlanError(PolylabError, ValueError):
    """Block plan requested on a grid too short to split (T <= 1)."""


class NumericsError(PolylabError, ArithmeticError):
    """A numerical result violates a safety envelope (e.g. |r| > 1 + 1e-12)."""
