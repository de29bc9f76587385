# fsforge/src/core/exceptions.py
from typing import Any, Dict

from .models import to_jsonable


class FsforgeError(Exception):
    """Domain failure with a machine-readable code (the class name)."""

    code = "FsforgeError"
    exit_code = 2

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.code = cls.__name__

    def __init__(self, detail: str, **context: Any):
        super().__init__(detail)
        self.detail = detail
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": self.code,
            "message": self.detail,
            "context": to_jsonable(self.context),
        }


class ProblemFileError(FsforgeError):
    """Unreadable or malformed input file."""

    exit_code = 1


class PreconditionFailed(FsforgeError):
    pass


# ==================== landscape ====================

class LandscapeError(FsforgeError):
    pass


class NonMorse(LandscapeError):
    pass


class DegenerateValues(LandscapeError):
    pass


class RootFindingFailed(LandscapeError):
    pass


class ValueOnRay(LandscapeError):
    pass


class ValueAtOrigin(LandscapeError):
    pass


class AmbiguousOrdering(LandscapeError):
    pass


class NonPositiveBracket(LandscapeError):
    pass


# ==================== flow ====================

class FlowError(FsforgeError):
    pass


class DriftExceeded(FlowError):
    pass


class StepFailure(FlowError):
    pass


class InteriorCriticalValue(FlowError):
    pass


class Inconclusive(FlowError):
    pass


class FlowlineRejected(FlowError):
    pass


class NonIsolated(FlowError):
    pass


# ==================== transport ====================

class TransportError(FsforgeError):
    pass


class IllConditioned(TransportError):
    pass


class AngularResolutionExceeded(TransportError):
    pass


class EndpointTangency(TransportError):
    pass


# ==================== floer ====================

class FloerError(FsforgeError):
    pass


class ShapeMismatch(FloerError):
    pass


class NoConvergence(FloerError):
    pass


class DivergedField(FloerError):
    pass


# ==================== category ====================

class CategoryError(FsforgeError):
    pass


class DirectednessViolation(CategoryError):
    pass


class RelationFailure(CategoryError):
    pass


class MultipleCrossings(CategoryError):
    pass


class CountUndefined(CategoryError):
    pass
