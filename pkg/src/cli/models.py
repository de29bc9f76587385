# fsforge/src/cli/models.py
import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from core.exceptions import ProblemFileError
from core.io import load_document, parse_coefficients
from category.models import CoefficientFamily
from landscape.models import HolomorphicFunction

COMMANDS = ("crit", "order", "flows", "grade", "floer", "category", "wallcross")


class RunConfig(BaseModel):
    """One CLI invocation."""

    command: str
    problem: Path
    output: Path = Path("out")
    alpha: Optional[float] = None
    overrides: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    jobs: Optional[int] = None
    grid: Optional[Tuple[int, int]] = None
    pair: Optional[Tuple[int, int]] = None
    m1_file: Optional[Path] = None
    m2_file: Optional[Path] = None
    log_file: Optional[Path] = None

    @field_validator("command")
    @classmethod
    def known_command(cls, v):
        if v not in COMMANDS:
            raise ValueError(f"unknown command: {v}")
        return v

    @field_validator("output")
    @classmethod
    def writable_output(cls, v: Path):
        ancestor = v
        while not ancestor.exists() and ancestor != ancestor.parent:
            ancestor = ancestor.parent
        if ancestor.exists() and not (ancestor.is_dir() and os.access(ancestor, os.W_OK)):
            raise ValueError(f"output directory not writable: {v}")
        return v


class Problem(BaseModel):
    """Problem file: a polynomial plus the choices that go with it."""

    model_config = {"arbitrary_types_allowed": True}

    function: HolomorphicFunction
    alpha: float = float(np.pi / 2)
    theta: float = 0.0
    pair: Optional[Tuple[int, int]] = None
    generators: Optional[Tuple[int, int]] = None
    lifts: Dict[int, int] = Field(default_factory=dict)
    truncation: bool = False

    @classmethod
    def load(cls, path: Path) -> "Problem":
        document = load_document(path)
        if "coefficients" not in document:
            raise ProblemFileError(f"{path}: missing 'coefficients'", path=str(path))
        coefficients = parse_coefficients(document["coefficients"])
        try:
            F = HolomorphicFunction.from_coefficients(coefficients)
            if "translate" in document:
                F = F.translated(parse_coefficients([document["translate"]], "translate")[0])
            fields = {k: document[k] for k in ("alpha", "theta", "pair", "generators", "truncation") if k in document}
            fields["lifts"] = {int(k): int(v) for k, v in document.get("lifts", {}).items()}
            return cls(function=F, **fields)
        except (ValidationError, TypeError, ValueError) as e:
            raise ProblemFileError(f"{path}: {e}", path=str(path))


class FamilyFile(BaseModel):
    """Wall-crossing input: coefficient knots and the frame pair."""

    model_config = {"arbitrary_types_allowed": True}

    family: CoefficientFamily
    pair: Tuple[int, int]
    t_before: float = 0.0
    t_after: float = 1.0
    steps: int = 64

    @classmethod
    def load(cls, path: Path) -> "FamilyFile":
        document = load_document(path)
        if "knots" not in document or "pair" not in document:
            raise ProblemFileError(f"{path}: need 'knots' and 'pair'", path=str(path))
        try:
            knots = tuple(
                tuple(parse_coefficients(k, f"knots[{n}]")) for n, k in enumerate(document["knots"])
            )
            fields = {k: document[k] for k in ("t_before", "t_after", "steps") if k in document}
            return cls(family=CoefficientFamily(knots=knots), pair=tuple(document["pair"]), **fields)
        except (ValidationError, TypeError, ValueError) as e:
            raise ProblemFileError(f"{path}: {e}", path=str(path))


def load_m1_counts(path: Path) -> Dict[Tuple[int, int], Dict[Tuple[int, int], int]]:
    """{"i,j": [[a, b, count], ...]} -> {(i, j): {(a, b): count}}."""
    document = load_document(path)
    out: Dict[Tuple[int, int], Dict[Tuple[int, int], int]] = {}
    try:
        for key, rows in document.items():
            i, j = (int(p) for p in key.split(","))
            out[(i, j)] = {(int(a), int(b)): int(n) for a, b, n in rows}
    except (TypeError, ValueError) as e:
        raise ProblemFileError(f"{path}: malformed m1 counts: {e}", path=str(path))
    return out


def load_m2_tensors(path: Path) -> Dict[Tuple[int, int, int], np.ndarray]:
    """{"i,j,k": nested 0/1 lists} -> {(i, j, k): array}."""
    document = load_document(path)
    out: Dict[Tuple[int, int, int], np.ndarray] = {}
    try:
        for key, tensor in document.items():
            i, j, k = (int(p) for p in key.split(","))
            out[(i, j, k)] = np.asarray(tensor, dtype=int)
    except (TypeError, ValueError) as e:
        raise ProblemFileError(f"{path}: malformed m2 tensors: {e}", path=str(path))
    return out


def parse_grid(text: str) -> Tuple[int, int]:
    """'NSxNT' -> (ns, nt)."""
    try:
        ns, nt = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"grid must look like 64x64, got {text!r}")
    return ns, nt


def parse_pair(text: str) -> Tuple[int, int]:
    try:
        i, j = (int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"pair must look like 0,1, got {text!r}")
    return i, j
