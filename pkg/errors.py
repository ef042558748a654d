"""
Exception hierarchy shared by every module.
Each error kind knows the CLI exit status it maps to and can render
itself as a machine-readable record.
"""
from typing import Any, Dict, Optional


class DiscsError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_record(self) -> Dict[str, Any]:
        """Render the error as a JSON-serializable record."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


class InvalidArgumentError(DiscsError, ValueError):
    """Argument outside the documented range."""


class EvaluationError(DiscsError, ValueError):
    """A sampled function produced a non-finite value."""


class OutOfDomainError(DiscsError, ValueError):
    """Evaluation point outside the closed unit disc (or circle interior)."""


class UndefinedPhaseError(OutOfDomainError):
    """The phase conj(w)/w is requested at w = 0."""


class NotAStructureError(DiscsError):
    """The map J does not satisfy J^2 = -I."""


class NonGenericPositionError(DiscsError):
    """det(J_st + J) vanishes, J has no complex matrix."""


class InadmissibleError(DiscsError):
    """det(I - A conj(A)) vanishes."""


class SingularPullbackError(DiscsError):
    """The leading matrix of the transformation rule is singular at a point."""

    def __init__(self, message: str, point: Optional[Any] = None, **details: Any):
        super().__init__(message, point=point, **details)
        self.point = point


class BoundaryZeroError(DiscsError):
    """A function vanishes (numerically) on the boundary circle."""


class NotGeneralizedAnalyticError(DiscsError):
    """h does not solve h_wbar = mu conj(h) at grid resolution."""


class HypothesisViolationError(DiscsError):
    """An input violates a hypothesis the computation relies on."""

    exit_code = 2


class OrientationError(HypothesisViolationError):
    """The coordinate map reverses orientation (|g| > |f|)."""


class RootFindingError(DiscsError):
    """Located roots disagree with the argument-principle count."""


class DegenerateFitError(DiscsError):
    """The least-squares design matrix is rank deficient."""


class NoConvergenceError(DiscsError):
    """Fixed-point iteration did not reach the contraction tolerance."""

    exit_code = 3

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0, **details: Any):
        super().__init__(message, residual=residual, iterations=iterations, **details)
        self.residual = residual
        self.iterations = iterations


class EllipticityError(DiscsError):
    """|a| reached the ellipticity bound during iteration."""

    exit_code = 3


class DegenerateJacobianError(DiscsError):
    """The computed z(zeta) is not a diffeomorphism."""

    exit_code = 3


class WindingMismatchError(DiscsError):
    """The boundary winding of w differs from the requested index."""

    exit_code = 3
