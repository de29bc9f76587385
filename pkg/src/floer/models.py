# fsforge/src/floer/models.py
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import Field, model_validator

from core.models import Confidence, DomainModel
from flow.models import Flowline
from landscape.models import HolomorphicFunction


class FloerGrid(DomainModel):
    """Rectangle [-S, S] x [-T, T] with ns x nt nodes."""

    S: float = 4.0
    T: float = 4.0
    ns: int = 64
    nt: int = 64

    @model_validator(mode="after")
    def check_grid(self):
        if self.S <= 0 or self.T <= 0:
            raise ValueError("S and T must be positive")
        if self.ns < 16 or self.nt < 16:
            raise ValueError("need ns, nt >= 16")
        return self

    @property
    def s(self) -> np.ndarray:
        return np.linspace(-self.S, self.S, self.ns)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.nt)

    @property
    def hs(self) -> float:
        return 2.0 * self.S / (self.ns - 1)

    @property
    def ht(self) -> float:
        return 2.0 * self.T / (self.nt - 1)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ns, self.nt)

    def scaled(self, factor: float) -> "FloerGrid":
        """Same spacing on a rectangle scaled by factor (node counts rounded to even)."""
        def count(n: int) -> int:
            m = int(round((n - 1) * factor)) + 1
            return max(16, m + m % 2)

        return FloerGrid(S=self.S * factor, T=self.T * factor, ns=count(self.ns), nt=count(self.nt))

    def refined(self) -> "FloerGrid":
        return FloerGrid(S=self.S, T=self.T, ns=self.ns + self.ns // 2, nt=self.nt + self.nt // 2)


class FloerProblem(DomainModel):
    """Strip problem between two flowlines of Hom(x0, x1) at angle theta."""

    function: HolomorphicFunction
    theta: float
    gamma0: Flowline
    gamma1: Flowline
    x0: int
    x1: int
    grid: FloerGrid = Field(default_factory=FloerGrid)
    blend_margin: int = 5

    @property
    def shape(self) -> Tuple[int, int]:
        return self.grid.shape

    def sigma(self) -> np.ndarray:
        """Monotone blend from 0 at s = -S to 1 at s = S (tanh profile)."""
        s = self.grid.s
        width = max(self.blend_margin * self.grid.hs, 0.25 * self.grid.S)
        raw = 0.5 * (1.0 + np.tanh(s / width))
        return (raw - raw[0]) / (raw[-1] - raw[0])

    def boundary_data(self) -> np.ndarray:
        """ns x nt array holding the Dirichlet data on its outer ring (interior: initial guess)."""
        t = self.grid.t
        g0 = self.gamma0.evaluate(t)
        g1 = self.gamma1.evaluate(t)
        sigma = self.sigma()[:, None]
        return (1.0 - sigma) * g0[None, :] + sigma * g1[None, :]

    def with_grid(self, grid: FloerGrid) -> "FloerProblem":
        return self.model_copy(update={"grid": grid})


class FloerField(DomainModel):
    values: np.ndarray
    residual_norm: float
    converged: bool = False
    iterations: int = 0
    energy: Optional[float] = None

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.values.shape)


class EnergyIdentityReport(DomainModel):
    energy: float
    action_difference: float
    action0: float
    action1: float
    gap: float
    tolerance: float
    passed: bool
    stokes_value: Optional[float] = None


class HolomorphyReport(DomainModel):
    admissible_nodes: int
    expected: complex
    drift: float
    direct_drift: Optional[float] = None
    sup_interior: float
    sup_boundary: float
    passed: bool
    note: str = ""


class RotationReport(DomainModel):
    phi: float
    rotated_residual: float
    baseline_residual: float
    covariance_discrepancy: float
    tolerance: float
    passed: bool


class WittenFormReport(DomainModel):
    samples: int
    ds_discrepancy: float
    dt_discrepancy: float
    passed: bool


class GMWEnergyReport(DomainModel):
    lambdas: Tuple[float, ...]
    energies: Tuple[float, ...]
    slope: float
    intercept: float


class M1Entry(DomainModel):
    source_generator: int
    target_generator: int
    count: int
    confidence: Confidence
    supplied: bool = False
    counts_by_run: Dict[str, int] = Field(default_factory=dict)
    errors: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def parity(self) -> int:
        return self.count % 2


class M1Estimate(DomainModel):
    source: int
    target: int
    generators: Tuple[str, ...]
    gradings: Tuple[Optional[int], ...]
    matrix: np.ndarray
    entries: Tuple[M1Entry, ...] = Field(default_factory=tuple)

    @property
    def confidence(self) -> Confidence:
        if any(e.confidence == Confidence.LOW for e in self.entries):
            return Confidence.LOW
        return Confidence.HIGH

    def confidence_matrix(self) -> np.ndarray:
        """Per-entry flags, HIGH where nothing was attempted."""
        n = len(self.generators)
        flags = np.full((n, n), Confidence.HIGH.value, dtype=object)
        for e in self.entries:
            flags[e.target_generator, e.source_generator] = e.confidence.value
        return flags


def field_report(problem: FloerProblem, field: FloerField) -> Dict[str, Any]:
    """Binary-free JSON dump of a field, values row-major over (s, t)."""
    values = field.values.ravel()
    return {
        "grid": problem.grid.model_dump(),
        "theta": problem.theta,
        "x0": problem.x0,
        "x1": problem.x1,
        "residual_norm": field.residual_norm,
        "converged": field.converged,
        "iterations": field.iterations,
        "energy": field.energy,
        "values": [[float(z.real), float(z.imag)] for z in values],
    }
