"""Exception hierarchy shared by all modules.

ValidationError covers precondition failures that are detectable before any
expensive computation starts (CLI maps these to exit code 2).  NumericalError
covers failures discovered during a computation (exit code 3).
"""


class FilamentError(Exception):
    """Base class for all library errors."""


class ValidationError(FilamentError):
    """A precondition on the inputs does not hold."""


class NumericalError(FilamentError):
    """A computation failed or produced an unusable result."""


class NonSimpleCurve(ValidationError):
    """Self-distance estimate fell below tolerance; curve may self-intersect."""


class InsufficientNodes(ValidationError):
    """Too few sample nodes for the requested truncation order."""


class TooCloseToCurve(ValidationError):
    """Evaluation point violates the minimum-distance floor of the kernel."""


class EpsilonTooLarge(ValidationError):
    """Mollification scale does not fit inside the security radius."""


class NotOrthogonal(ValidationError):
    """Offset vector is not orthogonal to the tangent where required."""


class DegenerateCurvature(NumericalError):
    """Curvature vanishes; normal and binormal are undefined."""


class SingularPoint(NumericalError):
    """Kernel integrand evaluated at a point of the curve itself."""


class FitFailure(NumericalError):
    """Convergence-rate fit could not be performed on the given data."""


class ExtrapolationUnstable(NumericalError):
    """Power-law extrapolation residual is too large to trust the limit."""


class SecurityRadiusViolated(NumericalError):
    """The evolving curve no longer admits the configured mollification scale."""
