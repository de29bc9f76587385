# fsforge/src/transport/service.py
import logging
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.linalg import expm, subspace_angles

from core.config import Settings, settings as default_settings
from core.exceptions import (
    AngularResolutionExceeded,
    EndpointTangency,
    IllConditioned,
    NonMorse,
    PreconditionFailed,
)
from flow.models import Flowline, ProductFlowline
from landscape.models import CriticalDatum
from .models import (
    GradingDatum,
    LinearizedSystem,
    NondegeneracyReport,
    TransportFrame,
    complex_structure,
    line_angle,
    real_hessian,
)

logger = logging.getLogger(__name__)

GRADING_CONVENTION = "short-path=clockwise(-pi,0]; lift=beta+pi*sheet, beta in [0,pi)"

# Two-point Gauss nodes for the fourth-order Magnus step
_GAUSS = (0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0)


def _fold(angle: float) -> float:
    """Reduce to [0, π); values within roundoff below π become 0."""
    beta = float(np.mod(angle, np.pi))
    return 0.0 if np.pi - beta < 1e-12 else beta


def negative_line(hessian: complex, theta: float) -> float:
    """Angle in [0, π) of the negative eigenline of ∇²f_θ when F'' = hessian."""
    return _fold((np.pi + theta - np.angle(hessian)) / 2.0)


def positive_line(hessian: complex, theta: float) -> float:
    return _fold((theta - np.angle(hessian)) / 2.0)


class TransportService:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings

    # ==================== Linearization ====================

    def linearized_system(self, flowline: Flowline) -> LinearizedSystem:
        """Hessian samples of f_θ along an accepted flowline."""
        if flowline.is_constant:
            raise PreconditionFailed("constant flowline has no linearization window", index=flowline.source)
        F = flowline.function
        rot = np.exp(-1j * flowline.theta)

        def evaluator(t):
            return real_hessian(rot * F.second_derivative(flowline.evaluate(t, centered=False)))

        times = np.union1d(flowline.times, [flowline.t_mid])
        v = flowline.velocity(flowline.evaluate(flowline.t_mid, centered=False))
        system = LinearizedSystem(
            times=times,
            hessians=evaluator(times),
            J=complex_structure(2),
            t_mid=flowline.t_mid,
            flowline=flowline,
            tangent=np.array([float(np.real(v)), float(np.imag(v))]),
        ).with_evaluator(evaluator)
        logger.debug(f"linearized {flowline.source}->{flowline.target}: {len(times)} samples")
        return system

    def product_linearized_system(self, connection: ProductFlowline) -> LinearizedSystem:
        """Block-diagonal 4x4 system: moving component along its flowline, frozen one constant."""
        flowline = connection.flowline
        rot = np.exp(-1j * flowline.theta)
        F = flowline.function
        frozen_block = real_hessian(rot * connection.frozen.second_derivative(connection.frozen_point))
        m = slice(2 * connection.moving, 2 * connection.moving + 2)
        f = slice(2 * (1 - connection.moving), 2 * (1 - connection.moving) + 2)

        def evaluator(t):
            t = np.asarray(t, dtype=float)
            out = np.zeros(t.shape + (4, 4))
            out[..., m, m] = real_hessian(rot * F.second_derivative(flowline.evaluate(t, centered=False)))
            out[..., f, f] = frozen_block
            return out

        times = np.union1d(flowline.times, [flowline.t_mid])
        v = flowline.velocity(flowline.evaluate(flowline.t_mid, centered=False))
        tangent = np.zeros(4)
        tangent[m] = [float(np.real(v)), float(np.imag(v))]
        return LinearizedSystem(
            times=times,
            hessians=evaluator(times),
            J=complex_structure(4),
            t_mid=flowline.t_mid,
            flowline=flowline,
            tangent=tangent,
        ).with_evaluator(evaluator)

    # ==================== Transport ====================

    def transport_matrix(
        self,
        system: LinearizedSystem,
        refine: Optional[int] = None,
        initial_angle: Optional[float] = None,
    ) -> TransportFrame:
        """
        Fundamental matrix of v' = H(t) v over the system's window.

        Fourth-order Magnus steps; each grid interval is split into
        `refine` substeps. For 2x2 systems the line at `initial_angle`
        (default: the negative eigenline at the source) is transported
        and its angle path returned.
        """
        refine = refine or self.settings.TRANSPORT_REFINE
        times = system.times
        d = system.dim

        offsets = np.arange(refine) / refine
        left = (times[:-1, None] + np.diff(times)[:, None] * offsets[None, :]).ravel()
        edges = np.append(left, times[-1])
        h = np.diff(edges)

        A1 = system.hessian_at(edges[:-1] + _GAUSS[0] * h)
        A2 = system.hessian_at(edges[:-1] + _GAUSS[1] * h)
        hh = h[:, None, None]
        omega = 0.5 * hh * (A1 + A2) + (np.sqrt(3.0) / 12.0) * hh**2 * (A2 @ A1 - A1 @ A2)
        steps = expm(omega)

        history = np.empty((len(times), d, d))
        phi = np.eye(d)
        history[0] = phi
        for j, step in enumerate(steps):
            phi = step @ phi
            if (j + 1) % refine == 0:
                history[(j + 1) // refine] = phi

        J = system.J
        det_drift = float(np.max(np.abs(np.linalg.det(history) - 1.0)))
        omega_drift = float(np.max(np.abs(np.swapaxes(history, -1, -2) @ J @ history - J)))
        condition = float(np.max(np.linalg.cond(history)))
        if not np.isfinite(condition) or condition > self.settings.TRANSPORT_COND_MAX:
            raise IllConditioned(
                "fundamental matrix too ill-conditioned; shorten the window",
                condition=condition,
                bound=self.settings.TRANSPORT_COND_MAX,
            )

        lagrangian_path = unwrapped = None
        if d == 2:
            if initial_angle is None:
                initial_angle = self._default_initial_angle(system)
            v0 = np.array([np.cos(initial_angle), np.sin(initial_angle)])
            angles = line_angle(history @ v0)
            unwrapped = np.unwrap(angles, period=np.pi)
            unwrapped = unwrapped - unwrapped[0] + initial_angle
            if len(unwrapped) > 1 and np.max(np.abs(np.diff(unwrapped))) > np.pi / 4:
                raise IllConditioned("transported line jumps between samples; refine the grid")
            lagrangian_path = np.mod(unwrapped, np.pi)

        logger.debug(f"transport over {len(times)} samples: det drift {det_drift:.2e}, cond {condition:.2e}")
        return TransportFrame(
            times=times,
            phi=history[-1],
            history=history,
            det_drift=det_drift,
            omega_drift=omega_drift,
            condition=condition,
            initial_angle=initial_angle,
            lagrangian_path=lagrangian_path,
            unwrapped_path=unwrapped,
        )

    @staticmethod
    def _default_initial_angle(system: LinearizedSystem) -> float:
        fl = system.flowline
        if fl is None:
            return 0.0
        return negative_line(fl.function.second_derivative(fl.source_point), fl.theta)

    # ==================== Nondegeneracy ====================

    def nondegenerate(self, flowline: Flowline, refine: Optional[int] = None) -> NondegeneracyReport:
        return self.nondegenerate_system(self.linearized_system(flowline), refine)

    def nondegenerate_system(self, system: LinearizedSystem, refine: Optional[int] = None) -> NondegeneracyReport:
        """
        Bounded-kernel test by transport to t_mid.

        The non-negative eigenspace of H at the start is carried forward and
        the non-positive eigenspace at the end is carried backward; the
        kernel dimension is the number of principal angles below TOL_ANGLE.
        Nondegenerate iff that dimension is 1 and contains the tangent.
        """
        tol_angle = self.settings.TOL_ANGLE
        ambiguous = tol_angle * self.settings.ANGLE_AMBIGUITY_FACTOR
        frame = self.transport_matrix(system, refine)

        def eigen_subspace(H: np.ndarray, keep_positive: bool) -> np.ndarray:
            w, V = np.linalg.eigh(H)
            cutoff = self.settings.TOL_EIGEN * max(1.0, float(np.max(np.abs(w))))
            mask = w > -cutoff if keep_positive else w < cutoff
            return V[:, mask]

        start = eigen_subspace(system.hessian_at(system.times[0]), True)
        end = eigen_subspace(system.hessian_at(system.times[-1]), False)
        k_mid = int(np.argmin(np.abs(system.times - system.t_mid)))
        P_mid = frame.history[k_mid]
        forward = P_mid @ start
        backward = P_mid @ np.linalg.solve(frame.phi, end)

        angles: Sequence[float] = ()
        if start.shape[1] and end.shape[1]:
            angles = tuple(float(a) for a in subspace_angles(forward, backward))
        for a in angles:
            if tol_angle <= a < ambiguous:
                raise AngularResolutionExceeded(
                    "principal angle inside the ambiguity band",
                    angle=a,
                    tol=tol_angle,
                )
        kernel_dim = sum(1 for a in angles if a < tol_angle)

        tangent_angle = None
        nondegenerate = kernel_dim == 1
        if system.tangent is not None and kernel_dim >= 1:
            t = system.tangent[:, None]
            tangent_angle = float(
                max(np.max(subspace_angles(t, forward)), np.max(subspace_angles(t, backward)))
            )
            nondegenerate = nondegenerate and tangent_angle < ambiguous

        logger.debug(f"nondegeneracy: kernel_dim={kernel_dim}, angles={angles}, tangent={tangent_angle}")
        return NondegeneracyReport(
            nondegenerate=bool(nondegenerate),
            kernel_dim=int(kernel_dim),
            principal_angles=tuple(angles),
            start_dim=int(start.shape[1]),
            end_dim=int(end.shape[1]),
            t_mid=float(system.t_mid),
            tangent_angle=tangent_angle,
        )

    # ==================== Gradings ====================

    @staticmethod
    def distinguished_lagrangian(x: CriticalDatum, theta: float) -> float:
        """Δ_x: negative eigenline of ∇²f_θ at x, as an angle in [0, π)."""
        if abs(x.hessian) == 0:
            raise NonMorse("degenerate critical point", point=x.point)
        return negative_line(x.hessian, theta)

    def maslov_index(self, a, b, tol: Optional[float] = None) -> int:
        """Signed count of a(t) ≡ b(t) (mod π) for two paths of line angles."""
        tol = tol if tol is not None else self.settings.TOL_ANGLE
        a = np.asarray(a, dtype=float)
        b = np.broadcast_to(np.asarray(b, dtype=float), a.shape)
        if a.size == 0:
            raise PreconditionFailed("empty path")
        d = np.unwrap(a - b, period=np.pi)
        for end, value in (("start", d[0]), ("end", d[-1])):
            if abs(value - np.pi * np.round(value / np.pi)) < tol:
                raise EndpointTangency(f"paths are tangent at the {end}", angle=float(value))
        return int(np.floor(d[-1] / np.pi) - np.floor(d[0] / np.pi))

    def absolute_grading(
        self,
        flowline: Flowline,
        lifts: Optional[Dict[int, int]] = None,
        refine: Optional[int] = None,
    ) -> GradingDatum:
        """
        gr(γ) from the lifted Lagrangian Δ̃_x transported along γ.

        The transported line is snapped to the unstable line at y, closed
        with the clockwise short path to Δ_y, and compared with Δ̃_y.
        `lifts` maps a critical index to its π-sheet (default 0).
        """
        lifts = lifts or {}
        report = self.nondegenerate(flowline, refine)
        if not report.nondegenerate:
            raise PreconditionFailed(
                "flowline is degenerate",
                source=flowline.source,
                target=flowline.target,
                kernel_dim=report.kernel_dim,
            )

        F, theta = flowline.function, flowline.theta
        hess_x = complex(F.second_derivative(flowline.source_point))
        hess_y = complex(F.second_derivative(flowline.target_point))
        sheet_x, sheet_y = int(lifts.get(flowline.source, 0)), int(lifts.get(flowline.target, 0))
        lift_x = negative_line(hess_x, theta) + np.pi * sheet_x
        beta_y = negative_line(hess_y, theta)

        frame = self.transport_matrix(self.linearized_system(flowline), refine, initial_angle=lift_x)
        end = float(frame.unwrapped_path[-1])

        beta_u = positive_line(hess_y, theta)
        snapped = beta_u + np.pi * np.round((end - beta_u) / np.pi)
        snap_error = abs(end - snapped)
        if snap_error > 1e-3:
            logger.warning(f"transported line misses the unstable line at y by {snap_error:.2e}")

        closed = snapped - np.mod(snapped - beta_y, np.pi)
        grading = int(np.round((closed - (beta_y + np.pi * sheet_y)) / np.pi))
        return GradingDatum(
            source=flowline.source,
            target=flowline.target,
            ray=flowline.ray,
            lift=float(lift_x),
            lift_sheet=sheet_x,
            grading=grading,
            end_angle=end,
            snap_error=float(snap_error),
            convention=GRADING_CONVENTION,
        )

    @staticmethod
    def relative_grading(g0: GradingDatum, g1: GradingDatum) -> int:
        """gr(γ0, γ1) = gr(γ1) − gr(γ0)."""
        if (g0.source, g0.target) != (g1.source, g1.target):
            raise PreconditionFailed("generators belong to different Hom spaces")
        return g1.grading - g0.grading


transport_service = TransportService()
