# fsforge/src/landscape/service.py
import itertools
import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import root as solve_root

from core.config import Settings, settings as default_settings
from core.exceptions import (
    AmbiguousOrdering,
    DegenerateValues,
    NonMorse,
    NonPositiveBracket,
    PreconditionFailed,
    RootFindingFailed,
    ValueAtOrigin,
    ValueOnRay,
)
from .geometry import interior_witness
from .models import (
    CriticalDatum,
    GradientLikeReport,
    HolomorphicFunction,
    PhaseGeometry,
    ProductCriticalDatum,
    SeparableFunction,
)
from .roots import find_roots

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def wrap_angle(angle: float) -> float:
    """Representative in [0, 2π)."""
    wrapped = float(np.mod(angle, TWO_PI))
    return 0.0 if wrapped >= TWO_PI else wrapped


class LandscapeService:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings

    # ==================== Critical data ====================

    def critical_points(self, F: HolomorphicFunction, tol: Optional[float] = None) -> List[CriticalDatum]:
        """All critical points of F, Newton-polished, in (Re, Im) order."""
        tol = tol if tol is not None else self.settings.TOL_ROOT
        if F.degree < 2:
            raise PreconditionFailed("critical_points needs degree >= 2", degree=F.degree)
        if tol <= 0:
            raise PreconditionFailed("root tolerance must be positive", tol=tol)

        roots = find_roots(F.derivative_coefficients, tol, self.settings.ROOT_MAX_ITER)
        if roots is None:
            raise RootFindingFailed("companion and Aberth iterations did not converge", degree=F.degree)

        # Multiplicity check: a repeated root of F' is a degenerate critical point
        scale = max(1.0, float(np.max(np.abs(roots)))) if len(roots) else 1.0
        for a, b in itertools.combinations(range(len(roots)), 2):
            if abs(roots[a] - roots[b]) < 1e-6 * scale:
                raise NonMorse("repeated root of F'", point=complex(roots[a]))

        roots = sorted(roots, key=lambda z: (round(z.real, 9), round(z.imag, 9)))
        crit = []
        for k, x in enumerate(roots):
            hessian = complex(F.second_derivative(x))
            if abs(hessian) < max(tol, self.settings.TOL_MORSE):
                raise NonMorse("|F''| below tolerance at a critical point", point=complex(x), hessian=hessian)
            crit.append(CriticalDatum(index=k, point=complex(x), value=complex(F.value(x)), hessian=hessian))

        self._check_distinct_values([c.value for c in crit])
        logger.debug(f"critical points: {[c.point for c in crit]}")
        return crit

    def _check_distinct_values(self, values: Sequence[complex]) -> None:
        sep = self.settings.TOL_VALUE_SEPARATION
        for a, b in itertools.combinations(range(len(values)), 2):
            if abs(values[a] - values[b]) < sep:
                raise DegenerateValues(
                    "critical values collide",
                    indices=[a, b],
                    values=[values[a], values[b]],
                )

    def separable_critical_points(self, G: SeparableFunction) -> List[ProductCriticalDatum]:
        """Critical points of F1(z1) + F2(z2): all pairs of component critical points."""
        first = self.critical_points(G.components[0])
        second = self.critical_points(G.components[1])
        crit = []
        for k, (a, b) in enumerate(itertools.product(first, second)):
            crit.append(
                ProductCriticalDatum(
                    index=k,
                    components=(a.index, b.index),
                    points=(a.point, b.point),
                    value=a.value + b.value,
                    hessians=(a.hessian, b.hessian),
                )
            )
        self._check_distinct_values([c.value for c in crit])
        return crit

    # ==================== Ordering ====================

    def phase_geometry(self, crit: Sequence[CriticalDatum], alpha: float) -> PhaseGeometry:
        """Clockwise order from the ray at angle alpha, convexity and slopes."""
        clearance = self.settings.TOL_RAY_CLEARANCE
        alpha = wrap_angle(alpha)
        values = [complex(c.value) for c in crit]
        n = len(values)

        clockwise = []
        for k, w in enumerate(values):
            if abs(w) < clearance:
                raise ValueAtOrigin("critical value at the origin; translate F first", index=k, value=w)
            angle = wrap_angle(alpha - np.angle(w))
            if angle < clearance or angle > TWO_PI - clearance:
                raise ValueOnRay("critical value on the ray", index=k, value=w, alpha=alpha)
            clockwise.append(angle)

        order = tuple(int(i) for i in np.argsort(clockwise, kind="stable"))
        for a, b in zip(order, order[1:]):
            if clockwise[b] - clockwise[a] < clearance:
                raise AmbiguousOrdering(
                    "two critical values share a clockwise angle",
                    indices=[a, b],
                    angle=clockwise[a],
                )

        witness = interior_witness(values, self.settings.TOL_VALUE_SEPARATION)

        slopes = np.full((n, n), np.nan)
        for i, j in itertools.combinations(range(n), 2):
            slopes[i, j] = wrap_angle(np.angle(values[j] - values[i]))
            slopes[j, i] = wrap_angle(slopes[i, j] + np.pi)

        exceptional = tuple(sorted(wrap_angle(np.angle(w)) for w in values))
        return PhaseGeometry(
            alpha=alpha,
            values=tuple(values),
            order=order,
            clockwise_angles=tuple(clockwise),
            convex=witness is None,
            interior_witness=witness,
            slopes=slopes,
            exceptional_angles=exceptional,
        )

    # ==================== Conformal factor ====================

    def conformal_factor(self, F: HolomorphicFunction, z):
        """ρ(z) = |F'(z)|²."""
        return np.abs(F.derivative(z)) ** 2

    def poisson_bracket(self, F: HolomorphicFunction, theta: float, z):
        """{f_θ, g_θ} = ∂x f ∂y g − ∂y f ∂x g from the two gradients."""
        grad_f = np.conj(np.exp(-1j * theta) * F.derivative(z))
        grad_g = np.conj(-1j * np.exp(-1j * theta) * F.derivative(z))
        return grad_f.real * grad_g.imag - grad_f.imag * grad_g.real

    def check_gradient_like(
        self,
        F: HolomorphicFunction,
        theta: float,
        samples: Sequence[complex],
        margin: Optional[float] = None,
    ) -> GradientLikeReport:
        """
        Check that X_{g_θ} is gradient-like for f_θ on the samples.

        Args:
            F: the polynomial
            theta: rotation angle of f_θ, g_θ
            samples: evaluation points, each at least `margin` from Crit(F)
            margin: exclusion radius around critical points

        Returns:
            GradientLikeReport with the smallest bracket and the comparison
            of numerically found zeros of ∇f_θ against Crit(F).
        """
        margin = margin if margin is not None else self.settings.SAMPLE_MARGIN
        crit = self.critical_points(F)
        points = np.asarray([c.point for c in crit], dtype=complex)
        samples = np.asarray(samples, dtype=complex)
        if samples.size == 0:
            raise PreconditionFailed("no samples given")

        distances = np.min(np.abs(samples[:, None] - points[None, :]), axis=1)
        if np.any(distances < margin):
            k = int(np.argmin(distances))
            raise PreconditionFailed(
                "sample within margin of a critical point",
                sample=complex(samples[k]),
                margin=margin,
            )

        bracket = self.poisson_bracket(F, theta, samples)
        rho = self.conformal_factor(F, samples)
        if np.any(bracket <= 0):
            k = int(np.argmin(bracket))
            raise NonPositiveBracket("non-positive bracket", sample=complex(samples[k]), bracket=float(bracket[k]))

        zeros = self._gradient_zeros(F, theta, points)
        unmatched = tuple(
            c.index for c in crit if not any(abs(c.point - z) < 1e-8 * max(1.0, abs(c.point)) for z in zeros)
        )
        extra = [z for z in zeros if np.min(np.abs(points - z)) > 1e-8 * max(1.0, abs(z))]
        agreement = not unmatched and not extra and len(zeros) == len(points)

        return GradientLikeReport(
            theta=float(theta),
            n_samples=int(samples.size),
            min_bracket=float(np.min(bracket)),
            max_bracket_mismatch=float(np.max(np.abs(bracket - rho) / np.maximum(1.0, rho))),
            passed=bool(np.all(bracket > 0)),
            critical_agreement=bool(agreement),
            gradient_zeros=tuple(complex(z) for z in zeros),
            unmatched=unmatched,
        )

    def _gradient_zeros(self, F: HolomorphicFunction, theta: float, points: np.ndarray) -> List[complex]:
        """Zeros of ∇f_θ as a real 2-d system, seeded on a grid and near Crit(F)."""
        rot = np.exp(-1j * theta)

        def field(xy):
            v = np.conj(rot * F.derivative(complex(xy[0], xy[1])))
            return [v.real, v.imag]

        def jacobian(xy):
            c = rot * F.second_derivative(complex(xy[0], xy[1]))
            return [[c.real, -c.imag], [-c.imag, -c.real]]

        radius = 1.5 * (1.0 + float(np.max(np.abs(points))))
        axis = np.linspace(-radius, radius, 7)
        seeds = [complex(a, b) for a in axis for b in axis]
        seeds += [complex(p) + 0.05 * radius * np.exp(0.3j) for p in points]

        zeros: List[complex] = []
        for seed in seeds:
            sol = solve_root(field, [seed.real, seed.imag], jac=jacobian, method="hybr", tol=1e-14)
            if not sol.success:
                continue
            z = complex(sol.x[0], sol.x[1])
            if abs(F.derivative(z)) > 1e-9 * max(1.0, abs(z)) ** F.degree:
                continue
            if all(abs(z - w) > 1e-6 * max(1.0, abs(z)) for w in zeros):
                zeros.append(z)
        return zeros


landscape_service = LandscapeService()
