# fsforge/src/landscape/models.py
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import Field, PrivateAttr, field_validator, model_validator

from core.models import ComplexValue, DomainModel


class HolomorphicFunction(DomainModel):
    """Univariate complex polynomial F, coefficients constant term first."""

    coefficients: Tuple[ComplexValue, ...]

    _c0: np.ndarray = PrivateAttr()
    _c1: np.ndarray = PrivateAttr()
    _c2: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def check_leading(self):
        if len(self.coefficients) < 2:
            raise ValueError("polynomial must have degree >= 1")
        if self.coefficients[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")
        return self

    def model_post_init(self, __context) -> None:
        self._c0 = np.asarray(self.coefficients, dtype=complex)
        self._c1 = P.polyder(self._c0)
        self._c2 = P.polyder(self._c0, 2) if len(self._c0) > 2 else np.zeros(1, dtype=complex)

    @classmethod
    def from_coefficients(cls, coefficients: Sequence[complex]) -> "HolomorphicFunction":
        return cls(coefficients=tuple(complex(c) for c in coefficients))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def derivative_coefficients(self) -> np.ndarray:
        return self._c1

    # Horner evaluation, vectorized over arrays of points
    def value(self, z):
        return P.polyval(z, self._c0)

    def derivative(self, z):
        return P.polyval(z, self._c1)

    def second_derivative(self, z):
        return P.polyval(z, self._c2)

    def f_theta(self, z, theta: float):
        return np.real(np.exp(-1j * theta) * self.value(z))

    def g_theta(self, z, theta: float):
        return np.imag(np.exp(-1j * theta) * self.value(z))

    def translated(self, shift: complex) -> "HolomorphicFunction":
        """F + shift."""
        coeffs = list(self.coefficients)
        coeffs[0] = coeffs[0] + complex(shift)
        return HolomorphicFunction(coefficients=tuple(coeffs))

    def rotated(self, phi: float) -> "HolomorphicFunction":
        """e^{-i phi} F."""
        factor = np.exp(-1j * phi)
        return HolomorphicFunction(coefficients=tuple(complex(c * factor) for c in self.coefficients))

    def scaled_argument(self, a: complex) -> "HolomorphicFunction":
        """z -> F(a z)."""
        powers = np.asarray(a, dtype=complex) ** np.arange(len(self.coefficients))
        return HolomorphicFunction(coefficients=tuple(complex(c) for c in self._c0 * powers))


class CriticalDatum(DomainModel):
    index: int
    point: ComplexValue
    value: ComplexValue
    hessian: ComplexValue

    @field_validator("hessian")
    @classmethod
    def morse(cls, v):
        if v == 0:
            raise ValueError("hessian must be nonzero (Morse condition)")
        return v


class PhaseGeometry(DomainModel):
    alpha: float
    values: Tuple[ComplexValue, ...]
    order: Tuple[int, ...]
    clockwise_angles: Tuple[float, ...]
    convex: bool
    interior_witness: Optional[int] = None
    slopes: np.ndarray
    exceptional_angles: Tuple[float, ...]

    @model_validator(mode="after")
    def check_order(self):
        ordered = [self.clockwise_angles[i] for i in self.order]
        if any(b <= a for a, b in zip(ordered, ordered[1:])):
            raise ValueError("order must sort clockwise angles strictly increasingly")
        return self

    def position(self, index: int) -> int:
        return self.order.index(index)

    def precedes(self, i: int, j: int) -> bool:
        """x_i ≺ x_j in the clockwise order."""
        return self.position(i) < self.position(j)


class GradientLikeReport(DomainModel):
    theta: float
    n_samples: int
    min_bracket: float
    max_bracket_mismatch: float
    passed: bool
    critical_agreement: bool
    gradient_zeros: Tuple[ComplexValue, ...] = Field(default_factory=tuple)
    unmatched: Tuple[int, ...] = Field(default_factory=tuple)


class SeparableFunction(DomainModel):
    """G(z1, z2) = F1(z1) + F2(z2) on C^2."""

    components: Tuple[HolomorphicFunction, HolomorphicFunction]

    def value(self, z1, z2):
        return self.components[0].value(z1) + self.components[1].value(z2)

    def gradient_field(self, theta: float, z1, z2) -> Tuple[complex, complex]:
        rot = np.exp(-1j * theta)
        return (
            np.conj(rot * self.components[0].derivative(z1)),
            np.conj(rot * self.components[1].derivative(z2)),
        )


class ProductCriticalDatum(DomainModel):
    index: int
    components: Tuple[int, int]
    points: Tuple[ComplexValue, ComplexValue]
    value: ComplexValue
    hessians: Tuple[ComplexValue, ComplexValue]
