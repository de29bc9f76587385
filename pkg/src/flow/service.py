# fsforge/src/flow/service.py
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson, trapezoid

from core.config import Settings, settings as default_settings
from core.exceptions import (
    DriftExceeded,
    FlowlineRejected,
    FsforgeError,
    Inconclusive,
    InteriorCriticalValue,
    NonIsolated,
    NonMorse,
    PreconditionFailed,
)
from core.models import HomKind, Termination
from landscape.geometry import distance_to_segment, segment_parameter
from landscape.models import CriticalDatum, HolomorphicFunction, ProductCriticalDatum, SeparableFunction
from landscape.service import LandscapeService, wrap_angle
from .integrator import integrate_gradient_flow
from .models import ConnectionResult, FlowPath, Flowline, HomBasis, ProductFlowline, ShootingConfig

logger = logging.getLogger(__name__)


def exponential_tail(edge: float, rate: float) -> float:
    """∫_0^∞ edge·e^{-2·rate·s} ds: a quantity quadratic in the distance to a critical point."""
    return edge / (2.0 * rate)


class FlowService:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings
        self.landscape = LandscapeService(self.settings)

    def shooting_config(self, **overrides: Any) -> ShootingConfig:
        return ShootingConfig.from_settings(self.settings, **overrides)

    # ==================== Vector field ====================

    @staticmethod
    def gradient_field(F: HolomorphicFunction, theta: float, z):
        """∇f_θ(z) = conj(e^{-iθ} F'(z))."""
        return np.conj(np.exp(-1j * theta) * F.derivative(z))

    @staticmethod
    def unstable_directions(x: CriticalDatum, theta: float) -> Tuple[complex, complex]:
        """Unit directions ±e^{iβ} along which f_θ increases fastest away from x."""
        if abs(x.hessian) == 0:
            raise NonMorse("degenerate critical point", point=x.point)
        beta = float(np.mod((theta - np.angle(x.hessian)) / 2.0, np.pi))
        d = complex(np.exp(1j * beta))
        return d, -d

    # ==================== Integration ====================

    def integrate_flow(
        self,
        F: HolomorphicFunction,
        theta: float,
        z0: complex,
        config: Optional[ShootingConfig] = None,
        crit: Optional[Sequence[CriticalDatum]] = None,
        g_reference: Optional[float] = None,
    ) -> FlowPath:
        """Integrate ż = ∇f_θ(z) from z0 until capture, runaway or timeout."""
        config = config or self.shooting_config()
        if F.derivative(z0) == 0:
            raise PreconditionFailed("z0 is a critical point", z0=complex(z0))
        crit = crit if crit is not None else self.landscape.critical_points(F)
        points = np.asarray([c.point for c in crit], dtype=complex)
        return integrate_gradient_flow(
            F, theta, z0, config, points, self.settings.TOL_CONSERVE, g_reference=g_reference
        )

    # ==================== Connections ====================

    def _check_segment(self, crit: Sequence[CriticalDatum], x: int, y: int) -> None:
        wx, wy = crit[x].value, crit[y].value
        if abs(wy - wx) < self.settings.TOL_VALUE_SEPARATION:
            raise PreconditionFailed("F(x) = F(y)", source=x, target=y)
        for c in crit:
            if c.index in (x, y):
                continue
            t = segment_parameter(c.value, wx, wy)
            if 0.0 < t < 1.0 and distance_to_segment(c.value, wx, wy) < self.settings.TOL_SEGMENT:
                raise InteriorCriticalValue(
                    "another critical value lies on the segment",
                    source=x,
                    target=y,
                    blocking=c.index,
                )

    def find_connections(
        self,
        F: HolomorphicFunction,
        x: int,
        y: int,
        config: Optional[ShootingConfig] = None,
        crit: Optional[Sequence[CriticalDatum]] = None,
    ) -> ConnectionResult:
        """All gradient flowlines from x to y, by shooting along both unstable rays of x."""
        config = config or self.shooting_config()
        crit = list(crit) if crit is not None else self.landscape.critical_points(F)
        self._check_segment(crit, x, y)

        source, target = crit[x], crit[y]
        theta = wrap_angle(np.angle(target.value - source.value))
        g_x = float(F.g_theta(source.point, theta))

        flowlines: List[Flowline] = []
        outcomes: List[str] = []
        for ray, direction in enumerate(self.unstable_directions(source, theta)):
            z0 = source.point + config.launch_radius * direction
            path = self.integrate_flow(F, theta, z0, config, crit, g_reference=g_x)

            if path.termination == Termination.TIMEOUT:
                raise Inconclusive(
                    "separatrix neither captured nor escaped before max_time",
                    source=x,
                    target=y,
                    ray=ray,
                )
            if path.termination == Termination.CAPTURED and path.captured_index == y:
                flowlines.append(self._accept(F, theta, crit, x, y, ray, path))
                outcomes.append(f"captured:{y}")
            elif path.termination == Termination.CAPTURED:
                outcomes.append(f"captured:{path.captured_index}")
            else:
                outcomes.append(path.termination.value)

        logger.info(f"connections {x}->{y}: {len(flowlines)} (theta={theta:.6f}, rays={outcomes})")
        return ConnectionResult(source=x, target=y, theta=theta, flowlines=tuple(flowlines), ray_outcomes=tuple(outcomes))

    def _accept(
        self,
        F: HolomorphicFunction,
        theta: float,
        crit: Sequence[CriticalDatum],
        x: int,
        y: int,
        ray: int,
        path: FlowPath,
    ) -> Flowline:
        """Turn a captured separatrix into a Flowline, enforcing its invariants."""
        wx, wy = crit[x].value, crit[y].value
        images = F.value(path.points)
        deviation = max(distance_to_segment(w, wx, wy) for w in images)
        drift = float(np.max(np.abs(F.g_theta(path.points, theta) - F.g_theta(crit[x].point, theta))))
        f_vals = F.f_theta(path.points, theta)
        monotone = bool(np.all(np.diff(f_vals) >= -self.settings.TOL_CONSERVE))

        if drift >= self.settings.TOL_CONSERVE:
            raise DriftExceeded("accepted flowline drifts beyond tolerance", source=x, target=y, drift=drift)
        if deviation >= self.settings.TOL_SEGMENT:
            raise FlowlineRejected("F-image leaves the segment", source=x, target=y, deviation=deviation)
        if not monotone:
            drop = float(-np.min(np.diff(f_vals)))
            raise FlowlineRejected("f_theta decreases along the path", source=x, target=y, decrease=drop)

        f_mid = 0.5 * (float(F.f_theta(crit[x].point, theta)) + float(F.f_theta(crit[y].point, theta)))
        t_mid = float(np.interp(f_mid, np.maximum.accumulate(f_vals), path.times))

        flowline = Flowline(
            function=F,
            theta=theta,
            source=x,
            target=y,
            source_point=crit[x].point,
            target_point=crit[y].point,
            ray=ray,
            times=path.times,
            points=path.points,
            conserved_drift=drift,
            segment_deviation=float(deviation),
            monotone=monotone,
            t_mid=t_mid,
        )
        return flowline.model_copy(update={"action": self.action(flowline)})

    # ==================== Action ====================

    def action(self, flowline: Flowline) -> float:
        """
        𝒜_θ(γ) = ∫_γ λ − ∫ (g_θ(γ) − g_θ(x)) dt with λ = ½(x dy − y dx).

        The straight approach segments to x and y are added exactly for the
        λ-term. The drift term is quadratic in the distance to x and y, so
        its tails decay at twice the rates |F''|.
        """
        if flowline.is_constant:
            return 0.0
        F, theta = flowline.function, flowline.theta
        z, t = flowline.points, flowline.times
        zdot = self.gradient_field(F, theta, z)

        lam = 0.5 * np.imag(np.conj(z) * zdot)
        integral = float(simpson(lam, x=t))
        integral += 0.5 * float(np.imag(np.conj(flowline.source_point) * z[0]))
        integral += 0.5 * float(np.imag(np.conj(z[-1]) * flowline.target_point))

        h = F.g_theta(z, theta) - float(F.g_theta(flowline.source_point, theta))
        lam_x, lam_y = flowline.endpoint_rates()
        tails = exponential_tail(float(h[0]), lam_x) + exponential_tail(float(h[-1]), lam_y)
        drift_term = float(trapezoid(h, x=t)) + tails
        return integral - drift_term

    # ==================== Diagnostics ====================

    def speed_law_residual(self, flowline: Flowline) -> float:
        """max |d/dt F(γ) − ρ(γ) e^{iθ}| over interior uniform samples (4th-order differences)."""
        if flowline.is_constant:
            return 0.0
        F, theta = flowline.function, flowline.theta
        t, z = flowline.times, flowline.points
        # The terminal sample sits off the uniform grid
        if len(t) > 2 and not np.isclose(t[-1] - t[-2], t[1] - t[0], rtol=1e-6):
            t, z = t[:-1], z[:-1]
        if len(t) < 5:
            return 0.0
        h = float(t[1] - t[0])
        w = F.value(z)
        dw = (-w[4:] + 8 * w[3:-1] - 8 * w[1:-3] + w[:-4]) / (12 * h)
        rho = np.abs(F.derivative(z[2:-2])) ** 2
        return float(np.max(np.abs(dw - rho * np.exp(1j * theta))))

    def straightness(self, flowline: Flowline) -> Dict[str, Any]:
        return {
            "segment_deviation": flowline.segment_deviation,
            "monotone": flowline.monotone,
            "speed_law_residual": self.speed_law_residual(flowline),
            "conserved_drift": flowline.conserved_drift,
            "max_radius": float(np.max(np.abs(flowline.points))),
        }

    # ==================== Hom spaces ====================

    def hom_basis(
        self,
        F: HolomorphicFunction,
        alpha: float,
        x: int,
        y: int,
        config: Optional[ShootingConfig] = None,
        crit: Optional[Sequence[CriticalDatum]] = None,
    ) -> HomBasis:
        """Basis of Hom(x, y): identity, zero, or the flowlines from x to y."""
        crit = list(crit) if crit is not None else self.landscape.critical_points(F)
        geometry = self.landscape.phase_geometry(crit, alpha)
        if x == y:
            return HomBasis(source=x, target=y, kind=HomKind.IDENTITY, generators=(f"id[{x}]",))
        if not geometry.precedes(x, y):
            return HomBasis(source=x, target=y, kind=HomKind.ZERO)

        result = self.find_connections(F, x, y, config, crit)
        labels = tuple(f"g[{x}->{y}]#{k}" for k in range(result.count))
        return HomBasis(
            source=x,
            target=y,
            kind=HomKind.FLOWLINES,
            generators=labels,
            flowlines=result.flowlines,
            theta=result.theta,
        )

    def connection_table(
        self,
        F: HolomorphicFunction,
        pairs: Sequence[Tuple[int, int]],
        config: Optional[ShootingConfig] = None,
        jobs: Optional[int] = None,
    ) -> List[Tuple[Tuple[int, int], Any]]:
        """find_connections over many pairs; each entry is a result or an error dict, in input order."""
        config = config or self.shooting_config()
        jobs = jobs or self.settings.JOBS
        tasks = [(self.settings, F, x, y, config) for x, y in pairs]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_connection_job, tasks))
        else:
            outcomes = [_connection_job(task) for task in tasks]
        return list(zip([tuple(p) for p in pairs], outcomes))

    # ==================== Separable C^2 ====================

    def find_product_connections(
        self,
        G: SeparableFunction,
        x: int,
        y: int,
        config: Optional[ShootingConfig] = None,
    ) -> List[ProductFlowline]:
        """
        Connections of F1(z1) + F2(z2) between product critical points.

        Exactly one component moves along a flowline of its own at the common
        angle while the other sits at a critical point. When both components
        would have to move, the solutions come in a family and NonIsolated is
        raised.
        """
        crit = self.landscape.separable_critical_points(G)
        source, target = crit[x], crit[y]
        for c in crit:
            if c.index in (x, y):
                continue
            t = segment_parameter(c.value, source.value, target.value)
            if 0.0 < t < 1.0 and distance_to_segment(c.value, source.value, target.value) < self.settings.TOL_SEGMENT:
                raise InteriorCriticalValue("another critical value lies on the segment", source=x, target=y, blocking=c.index)

        moving = [k for k in (0, 1) if source.components[k] != target.components[k]]
        if not moving:
            raise PreconditionFailed("source and target coincide", source=x, target=y)
        if len(moving) == 2:
            slopes = [
                np.angle(
                    G.components[k].value(target.points[k]) - G.components[k].value(source.points[k])
                )
                for k in (0, 1)
            ]
            if abs(np.angle(np.exp(1j * (slopes[0] - slopes[1])))) < self.settings.TOL_ANGLE:
                raise NonIsolated("both components move at a common slope", source=x, target=y)
            return []

        k = moving[0]
        frozen = 1 - k
        component = G.components[k]
        result = self.find_connections(component, source.components[k], target.components[k], config)
        return [
            ProductFlowline(
                source=x,
                target=y,
                moving=k,
                flowline=f,
                frozen=G.components[frozen],
                frozen_point=source.points[frozen],
            )
            for f in result.flowlines
        ]


def _connection_job(task) -> Any:
    config_settings, F, x, y, config = task
    try:
        return FlowService(config_settings).find_connections(F, x, y, config)
    except FsforgeError as e:
        return e.to_dict()


flow_service = FlowService()
