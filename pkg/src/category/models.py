# fsforge/src/category/models.py
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator

from core.models import ComplexValue, Confidence, DomainModel, HomKind, Side, pair_key
from landscape.models import HolomorphicFunction


class CategoryHom(DomainModel):
    source: int
    target: int
    kind: HomKind
    generators: Tuple[str, ...] = Field(default_factory=tuple)
    gradings: Tuple[Optional[int], ...] = Field(default_factory=tuple)
    actions: Tuple[Optional[float], ...] = Field(default_factory=tuple)

    @model_validator(mode="after")
    def check_lengths(self):
        n = len(self.generators)
        if self.gradings and len(self.gradings) != n:
            raise ValueError("one grading per generator")
        if self.actions and len(self.actions) != n:
            raise ValueError("one action per generator")
        return self

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def graded(self) -> bool:
        return bool(self.gradings) and all(g is not None for g in self.gradings)


class DirectedCategoryData(DomainModel):
    """
    Directed F2 category of one (F, alpha).

    m1 matrices are indexed [target generator, source generator]. An m2
    tensor for (i, j, k) has shape (rank(i,k), rank(i,j), rank(j,k)) and
    holds m2(a, b) for a in Hom(i, j), b in Hom(j, k).
    """

    objects: Tuple[int, ...]
    homs: Dict[str, CategoryHom]
    m1: Dict[str, np.ndarray] = Field(default_factory=dict)
    m1_confidence: Dict[str, np.ndarray] = Field(default_factory=dict)
    m2: Optional[Dict[str, np.ndarray]] = None
    provenance: Dict[str, Dict[str, Any]] = Field(default_factory=dict)

    def position(self, index: int) -> int:
        return self.objects.index(index)

    def hom(self, i: int, j: int) -> CategoryHom:
        key = pair_key(i, j)
        if key in self.homs:
            return self.homs[key]
        return CategoryHom(source=i, target=j, kind=HomKind.ZERO)

    def rank(self, i: int, j: int) -> int:
        return self.hom(i, j).rank

    def m1_matrix(self, i: int, j: int, verified_only: bool = False) -> np.ndarray:
        """m1 on Hom(i, j) mod 2; LOW-confidence entries zeroed when verified_only."""
        n = self.rank(i, j)
        key = pair_key(i, j)
        matrix = np.asarray(self.m1.get(key, np.zeros((n, n), dtype=int)), dtype=int) % 2
        if verified_only and key in self.m1_confidence:
            matrix = np.where(self.m1_confidence[key] == Confidence.LOW.value, 0, matrix)
        return matrix

    def m2_tensor(self, i: int, j: int, k: int) -> Optional[np.ndarray]:
        if self.m2 is None:
            return None
        tensor = self.m2.get(f"{i},{j},{k}")
        return None if tensor is None else np.asarray(tensor, dtype=int) % 2


class AInfinityReport(DomainModel):
    passed: bool
    max_n: int
    checks: Tuple[str, ...] = Field(default_factory=tuple)
    excluded_low_confidence: int = 0


class PLLattice(DomainModel):
    """Thimble classes (critical indices in clockwise order) with an antisymmetric pairing."""

    basis: Tuple[int, ...]
    pairing: np.ndarray

    @field_validator("pairing")
    @classmethod
    def check_pairing(cls, v):
        v = np.asarray(v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("pairing must be square")
        if not np.array_equal(v, -v.T):
            raise ValueError("pairing must be antisymmetric")
        return v.astype(int)

    @model_validator(mode="after")
    def check_size(self):
        if self.pairing.shape[0] != len(self.basis):
            raise ValueError("pairing size must match the basis")
        return self

    def unit(self, index: int) -> np.ndarray:
        """Class of the thimble of critical point `index`."""
        e = np.zeros(len(self.basis), dtype=int)
        e[self.basis.index(index)] = 1
        return e

    def pair(self, x, y) -> int:
        return int(np.asarray(x, dtype=int) @ self.pairing @ np.asarray(y, dtype=int))


class CoefficientFamily(DomainModel):
    """Piecewise-linear path of coefficient vectors over t in [0, 1]."""

    knots: Tuple[Tuple[ComplexValue, ...], ...]

    @model_validator(mode="after")
    def check_knots(self):
        if len(self.knots) < 2:
            raise ValueError("a family needs at least two knots")
        if len({len(k) for k in self.knots}) != 1:
            raise ValueError("all knots need the same number of coefficients")
        return self

    def at(self, t: float) -> HolomorphicFunction:
        t = min(1.0, max(0.0, float(t)))
        nodes = np.linspace(0.0, 1.0, len(self.knots))
        k = min(int(np.searchsorted(nodes, t, side="right")) - 1, len(self.knots) - 2)
        w = (t - nodes[k]) / (nodes[k + 1] - nodes[k])
        a = np.asarray(self.knots[k], dtype=complex)
        b = np.asarray(self.knots[k + 1], dtype=complex)
        coeffs = (1.0 - w) * a + w * b
        # Trim a vanishing leading coefficient
        while len(coeffs) > 2 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        return HolomorphicFunction.from_coefficients(coeffs)


class WallCrossingEvent(DomainModel):
    frame: Tuple[int, int]
    moving: Optional[int] = None
    side: Side = Side.AFTER
    t_before: float
    t_after: float
    t_crossing: Optional[float] = None
    before_counts: Dict[str, int] = Field(default_factory=dict)
    predicted_counts: Dict[str, int] = Field(default_factory=dict)
    recounted_counts: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_keys(self):
        if set(self.predicted_counts) != set(self.recounted_counts):
            raise ValueError("prediction and recount must share their keys")
        return self

    @property
    def passed(self) -> bool:
        return all(self.predicted_counts[k] % 2 == self.recounted_counts[k] % 2 for k in self.predicted_counts)


class ExceptionalAngle(DomainModel):
    angle: float
    wrapping: Tuple[int, ...]
    order_before: Tuple[int, ...]
    order_after: Tuple[int, ...]


def category_report(data: DirectedCategoryData) -> Dict[str, Any]:
    """JSON shape of the category dump."""
    homs: Dict[str, List[Dict[str, Any]]] = {}
    for key, hom in data.homs.items():
        homs[key] = [
            {
                "generator": g,
                "grading": hom.gradings[n] if hom.gradings else None,
                "action": hom.actions[n] if hom.actions else None,
            }
            for n, g in enumerate(hom.generators)
        ]
    return {
        "objects": list(data.objects),
        "homs": homs,
        "m1": {k: np.asarray(v, dtype=int).tolist() for k, v in data.m1.items()},
        "m1_confidence": {k: np.asarray(v).tolist() for k, v in data.m1_confidence.items()},
        "m2": None if data.m2 is None else {k: np.asarray(v, dtype=int).tolist() for k, v in data.m2.items()},
        "provenance": data.provenance,
    }
