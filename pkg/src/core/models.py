# fsforge/src/core/models.py
import math
from enum import Enum
from typing import Annotated, Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer


# Complex scalars travel as [re, im] pairs
def _coerce_complex(v: Any) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex pairs must have exactly two entries")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict) and {"re", "im"} <= set(v):
        return complex(float(v["re"]), float(v["im"]))
    return complex(v)


def _complex_pair(z: complex) -> list:
    return [float(z.real), float(z.imag)]


ComplexValue = Annotated[
    complex,
    BeforeValidator(_coerce_complex),
    PlainSerializer(_complex_pair, return_type=list),
]


# Enums
class Termination(str, Enum):
    CAPTURED = "captured"
    RUNAWAY = "runaway"
    TIMEOUT = "timeout"


class Confidence(str, Enum):
    LOW = "low"
    HIGH = "high"


class HomKind(str, Enum):
    ZERO = "zero"
    IDENTITY = "identity"
    FLOWLINES = "flowlines"


class Side(str, Enum):
    BEFORE = "before"
    AFTER = "after"


# Base models
class DomainModel(BaseModel):
    """Immutable domain value; numpy arrays are carried as-is."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class StandardReport(BaseModel):
    success: bool
    message: str
    data: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, Any] = Field(default_factory=dict)
    version: str = "unknown"
    error: Optional[Dict[str, Any]] = None


# ==================== Serialization helpers ====================

def to_jsonable(obj: Any) -> Any:
    """Convert numpy / complex / pydantic values into plain JSON types."""
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def pair_key(i: int, j: int) -> str:
    return f"{i},{j}"
