# fsforge/src/flow/models.py
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import Field, PrivateAttr, model_validator
from scipy.interpolate import CubicHermiteSpline

from core.config import Settings
from core.models import ComplexValue, DomainModel, HomKind, Termination
from landscape.models import HolomorphicFunction


class ShootingConfig(DomainModel):
    launch_radius: float = 1e-4
    capture_radius: float = 1e-3
    r_max: Optional[float] = None
    method: str = "DOP853"
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 0.5
    max_time: float = 200.0
    sample_dt: float = 0.01
    capture_steps: int = 3

    @model_validator(mode="after")
    def check_radii(self):
        if not 0 < self.launch_radius < self.capture_radius:
            raise ValueError("need 0 < launch_radius < capture_radius")
        if self.r_max is not None and self.r_max <= self.capture_radius:
            raise ValueError("need capture_radius < r_max")
        if min(self.rtol, self.atol, self.max_step, self.max_time, self.sample_dt) <= 0:
            raise ValueError("integrator tolerances and limits must be positive")
        if self.method not in ("DOP853", "RK45", "RK23"):
            raise ValueError(f"unsupported integrator: {self.method}")
        return self

    @classmethod
    def from_settings(cls, config: Settings, **overrides: Any) -> "ShootingConfig":
        values = dict(
            launch_radius=config.LAUNCH_RADIUS,
            capture_radius=config.CAPTURE_RADIUS,
            method=config.RK_METHOD,
            rtol=config.RK_RTOL,
            atol=config.RK_ATOL,
            max_step=config.RK_MAX_STEP,
            max_time=config.FLOW_MAX_TIME,
            sample_dt=config.SAMPLE_DT,
            capture_steps=config.CAPTURE_STEPS,
        )
        values.update(overrides)
        return cls(**values)

    def runaway_bound(self, critical_points: np.ndarray) -> float:
        if self.r_max is not None:
            return self.r_max
        scale = float(np.max(np.abs(critical_points))) if len(critical_points) else 0.0
        return 10.0 * (1.0 + scale)


class FlowPath(DomainModel):
    """Raw result of one integration, before it is judged as a connection."""

    theta: float
    times: np.ndarray
    points: np.ndarray
    termination: Termination
    captured_index: Optional[int] = None
    drift: float
    drift_bound: float
    steps: int


class Flowline(DomainModel):
    function: HolomorphicFunction
    theta: float
    source: int
    target: int
    source_point: ComplexValue
    target_point: ComplexValue
    ray: int = 0
    times: np.ndarray
    points: np.ndarray
    conserved_drift: float = 0.0
    segment_deviation: float = 0.0
    monotone: bool = True
    t_mid: float = 0.0
    action: Optional[float] = None

    _spline: Optional[CubicHermiteSpline] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def check_samples(self):
        if self.times.ndim != 1 or self.times.shape != self.points.shape or self.times.size == 0:
            raise ValueError("times and points must be matching 1-d arrays")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        return self

    @classmethod
    def constant(cls, F: HolomorphicFunction, theta: float, index: int, point: complex) -> "Flowline":
        """The stationary solution at a critical point (generator of Hom(x, x))."""
        return cls(
            function=F,
            theta=theta,
            source=index,
            target=index,
            source_point=point,
            target_point=point,
            times=np.array([0.0]),
            points=np.array([complex(point)]),
            action=0.0,
        )

    @property
    def is_constant(self) -> bool:
        return self.source == self.target

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def velocity(self, z):
        return np.conj(np.exp(-1j * self.theta) * self.function.derivative(z))

    def endpoint_rates(self) -> Tuple[float, float]:
        """Exponential rates |F''| at the source and the target."""
        return (
            float(abs(self.function.second_derivative(self.source_point))),
            float(abs(self.function.second_derivative(self.target_point))),
        )

    def _hermite(self) -> CubicHermiteSpline:
        if self._spline is None:
            v = self.velocity(self.points)
            self._spline = CubicHermiteSpline(
                self.times,
                np.column_stack([self.points.real, self.points.imag]),
                np.column_stack([v.real, v.imag]),
            )
        return self._spline

    def evaluate(self, t, centered: bool = True):
        """
        γ(t) for arbitrary times.

        Inside the sampled range this is Hermite interpolation with the
        exact velocity; outside it the path follows the linearized
        exponential approach to the endpoint critical points. With
        centered=True, t = 0 is where f_θ crosses the segment midpoint.
        """
        t = np.asarray(t, dtype=float)
        if self.is_constant or self.times.size == 1:
            return np.full(t.shape, complex(self.source_point), dtype=complex)

        t_abs = t + self.t_mid if centered else t
        lam_x, lam_y = self.endpoint_rates()
        t0, t1 = self.times[0], self.times[-1]
        inside = np.clip(t_abs, t0, t1)
        xy = self._hermite()(inside)
        z = xy[..., 0] + 1j * xy[..., 1]

        head = t_abs < t0
        tail = t_abs > t1
        if np.any(head):
            offset = self.points[0] - self.source_point
            z = np.where(head, self.source_point + offset * np.exp(lam_x * (t_abs - t0)), z)
        if np.any(tail):
            offset = self.points[-1] - self.target_point
            z = np.where(tail, self.target_point + offset * np.exp(-lam_y * (t_abs - t1)), z)
        return z

    def shifted(self, dt: float) -> "Flowline":
        """Time-translated copy."""
        values = dict(self)
        values.update(times=self.times + dt, t_mid=self.t_mid + dt)
        return Flowline(**values)


class ConnectionResult(DomainModel):
    source: int
    target: int
    theta: float
    flowlines: Tuple[Flowline, ...] = Field(default_factory=tuple)
    ray_outcomes: Tuple[str, ...] = Field(default_factory=tuple)

    @property
    def count(self) -> int:
        return len(self.flowlines)

    @property
    def count_mod2(self) -> int:
        return self.count % 2


class HomBasis(DomainModel):
    source: int
    target: int
    kind: HomKind
    generators: Tuple[str, ...] = Field(default_factory=tuple)
    flowlines: Tuple[Flowline, ...] = Field(default_factory=tuple)
    theta: Optional[float] = None

    @property
    def rank(self) -> int:
        return len(self.generators)


class ProductFlowline(DomainModel):
    """A connection of F1(z1) + F2(z2) with one component held at a critical point."""

    source: int
    target: int
    moving: int
    flowline: Flowline
    frozen: HolomorphicFunction
    frozen_point: ComplexValue

    @property
    def theta(self) -> float:
        return self.flowline.theta


def flowline_report(flowline: Flowline, with_samples: bool = True) -> Dict[str, Any]:
    """JSON shape of one flowline."""
    report: Dict[str, Any] = {
        "drift": flowline.conserved_drift,
        "deviation": flowline.segment_deviation,
        "action": flowline.action,
        "monotone": flowline.monotone,
        "ray": flowline.ray,
    }
    if with_samples:
        report["samples"] = [[float(t), float(z.real), float(z.imag)] for t, z in zip(flowline.times, flowline.points)]
    return report


def connection_report(result: ConnectionResult, with_samples: bool = True) -> Dict[str, Any]:
    return {
        "source": result.source,
        "target": result.target,
        "theta": result.theta,
        "count": result.count,
        "count_mod2": result.count_mod2,
        "ray_outcomes": list(result.ray_outcomes),
        "flowlines": [flowline_report(f, with_samples) for f in result.flowlines],
    }
