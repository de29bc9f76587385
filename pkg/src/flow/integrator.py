# fsforge/src/flow/integrator.py
import logging
from typing import Optional

import numpy as np
from scipy.integrate import DOP853, RK23, RK45

from core.exceptions import DriftExceeded, StepFailure
from core.models import Termination
from landscape.models import HolomorphicFunction
from .models import FlowPath, ShootingConfig

logger = logging.getLogger(__name__)

SOLVERS = {"DOP853": DOP853, "RK45": RK45, "RK23": RK23}


def integrate_gradient_flow(
    F: HolomorphicFunction,
    theta: float,
    z0: complex,
    config: ShootingConfig,
    critical_points: np.ndarray,
    conserve_tol: float,
    g_reference: Optional[float] = None,
) -> FlowPath:
    """
    Adaptive Runge–Kutta integration of ż = ∇f_θ(z) from z0.

    Stops on capture (inside capture_radius of a critical point with
    |∇f_θ| decreasing over `capture_steps` accepted steps), on runaway
    past r_max, or at max_time. Samples are taken on a uniform grid of
    spacing sample_dt from the dense output, plus the terminal point.
    """
    rot = np.exp(-1j * theta)
    critical_points = np.asarray(critical_points, dtype=complex)
    r_max = config.runaway_bound(critical_points)
    z0 = complex(z0)
    g0 = float(F.g_theta(z0, theta)) if g_reference is None else float(g_reference)
    w0 = complex(F.value(z0))

    def rhs(t, y):
        v = np.conj(rot * F.derivative(complex(y[0], y[1])))
        return np.array([v.real, v.imag])

    solver = SOLVERS[config.method](
        rhs,
        0.0,
        np.array([z0.real, z0.imag]),
        config.max_time,
        rtol=config.rtol,
        atol=config.atol,
        max_step=config.max_step,
    )

    times = [0.0]
    points = [z0]
    k_sample = 1
    last_speed = abs(F.derivative(z0))
    decreasing = 0
    drift = abs(float(F.g_theta(z0, theta)) - g0)
    excursion = 0.0
    termination = Termination.TIMEOUT
    captured: Optional[int] = None
    steps = 0

    while solver.status == "running":
        message = solver.step()
        steps += 1
        if solver.status == "failed":
            raise StepFailure(f"integrator step failed: {message}", t=float(solver.t), z=complex(*solver.y))

        dense = solver.dense_output()
        first_new = len(points)
        while k_sample * config.sample_dt < solver.t:
            t_sample = k_sample * config.sample_dt
            y = dense(t_sample)
            times.append(t_sample)
            points.append(complex(y[0], y[1]))
            k_sample += 1

        z = complex(solver.y[0], solver.y[1])
        window = np.asarray(points[first_new:] + [z])
        drift = max(drift, float(np.max(np.abs(F.g_theta(window, theta) - g0))))
        excursion = max(excursion, float(np.max(np.abs(F.value(window) - w0))))

        speed = abs(F.derivative(z))
        decreasing = decreasing + 1 if speed < last_speed else 0
        last_speed = speed

        distances = np.abs(critical_points - z)
        nearest = int(np.argmin(distances)) if distances.size else -1
        if nearest >= 0 and distances[nearest] < config.capture_radius and decreasing >= config.capture_steps:
            termination, captured = Termination.CAPTURED, nearest
            break
        if abs(z) > r_max:
            termination = Termination.RUNAWAY
            break

    if solver.t > times[-1]:
        times.append(float(solver.t))
        points.append(complex(solver.y[0], solver.y[1]))

    drift_bound = conserve_tol * (1.0 + excursion)
    if drift > drift_bound:
        raise DriftExceeded(
            "conserved quantity drifted beyond tolerance",
            drift=drift,
            bound=drift_bound,
            termination=termination.value,
        )

    logger.debug(f"flow from {z0}: {termination.value} after {steps} steps, drift={drift:.2e}")
    return FlowPath(
        theta=float(theta),
        times=np.asarray(times, dtype=float),
        points=np.asarray(points, dtype=complex),
        termination=termination,
        captured_index=captured,
        drift=drift,
        drift_bound=drift_bound,
        steps=steps,
    )
