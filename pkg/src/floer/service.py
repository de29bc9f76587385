# fsforge/src/floer/service.py
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import RectBivariateSpline

from core.config import Settings, settings as default_settings
from core.exceptions import FsforgeError, PreconditionFailed, ShapeMismatch
from core.models import Confidence, HomKind
from flow.models import Flowline, HomBasis
from flow.service import FlowService
from landscape.models import HolomorphicFunction
from landscape.service import LandscapeService
from transport.service import TransportService
from .models import (
    EnergyIdentityReport,
    FloerField,
    FloerGrid,
    FloerProblem,
    GMWEnergyReport,
    HolomorphyReport,
    M1Entry,
    M1Estimate,
    RotationReport,
    WittenFormReport,
)
from .solver import gauss_newton, gradient_values, interior_residual

logger = logging.getLogger(__name__)

FieldLike = Union[FloerField, np.ndarray]


def _values(field: FieldLike) -> np.ndarray:
    return field.values if isinstance(field, FloerField) else np.asarray(field, dtype=complex)


class FloerService:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings
        self.landscape = LandscapeService(self.settings)
        self.flow = FlowService(self.settings)
        self.transport = TransportService(self.settings)

    def default_grid(self) -> FloerGrid:
        return FloerGrid(
            S=self.settings.FLOER_S,
            T=self.settings.FLOER_T,
            ns=self.settings.FLOER_NS,
            nt=self.settings.FLOER_NT,
        )

    # ==================== Problem setup ====================

    def build_problem(
        self,
        F: HolomorphicFunction,
        theta: float,
        gamma0: Flowline,
        gamma1: Flowline,
        grid: Optional[FloerGrid] = None,
    ) -> FloerProblem:
        problem = FloerProblem(
            function=F,
            theta=theta,
            gamma0=gamma0,
            gamma1=gamma1,
            x0=gamma0.source,
            x1=gamma0.target,
            grid=grid or self.default_grid(),
            blend_margin=self.settings.FLOER_BLEND_MARGIN,
        )
        self._check_problem(problem)
        return problem

    @staticmethod
    def _check_problem(problem: FloerProblem) -> None:
        for name, gamma in (("gamma0", problem.gamma0), ("gamma1", problem.gamma1)):
            if (gamma.source, gamma.target) != (problem.x0, problem.x1):
                raise PreconditionFailed(
                    f"{name} does not connect x0 to x1",
                    expected=[problem.x0, problem.x1],
                    found=[gamma.source, gamma.target],
                )
            if not gamma.is_constant and abs(np.angle(np.exp(1j * (gamma.theta - problem.theta)))) > 1e-9:
                raise PreconditionFailed(f"{name} lives at a different angle", theta=problem.theta, found=gamma.theta)

    def _check_shape(self, problem: FloerProblem, values: np.ndarray) -> None:
        if values.shape != problem.shape:
            raise ShapeMismatch("field does not match the grid", expected=list(problem.shape), found=list(values.shape))

    # ==================== Residual and solve ====================

    def residual(self, problem: FloerProblem, field: FieldLike) -> np.ndarray:
        """ns x nt residual; boundary nodes are excluded and left at zero."""
        u = _values(field)
        self._check_shape(problem, u)
        out = np.zeros(problem.shape, dtype=complex)
        out[1:-1, 1:-1] = interior_residual(problem.function, problem.theta, u, problem.grid.hs, problem.grid.ht)
        return out

    def solve(self, problem: FloerProblem, initial: Optional[np.ndarray] = None) -> FloerField:
        """Solve the Floer equation with Dirichlet data from the asymptotic flowlines."""
        self._check_problem(problem)
        boundary = problem.boundary_data()
        u0 = boundary.copy()
        if initial is not None:
            initial = np.asarray(initial, dtype=complex)
            self._check_shape(problem, initial)
            u0[1:-1, 1:-1] = initial[1:-1, 1:-1]

        crit = self.landscape.critical_points(problem.function)
        r_max = 10.0 * (1.0 + max(abs(c.point) for c in crit))
        ns, nt = problem.shape
        tol = 1e-8 * np.sqrt(ns * nt)

        u, norm, iterations = gauss_newton(
            problem.function,
            problem.theta,
            u0,
            problem.grid.hs,
            problem.grid.ht,
            tol,
            self.settings.FLOER_MAX_ITER,
            r_max,
        )
        field = FloerField(values=u, residual_norm=norm, converged=True, iterations=iterations)
        field = field.model_copy(update={"energy": self.energy(problem, field)})
        logger.info(
            f"Floer solve {problem.x0}->{problem.x1} on {ns}x{nt}: "
            f"|R|={norm:.2e}, E={field.energy:.3e}, {iterations} iterations"
        )
        return field

    # ==================== Energy ====================

    def _derivatives(self, problem: FloerProblem, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u_s, u_t = np.gradient(u, problem.grid.s, problem.grid.t, edge_order=2)
        return u_s, u_t

    def energy(self, problem: FloerProblem, field: FieldLike) -> float:
        """½∬ |∂_s u|² + |∂_t u − ∇f_θ(u)|² by the trapezoid rule."""
        u = _values(field)
        self._check_shape(problem, u)
        u_s, u_t = self._derivatives(problem, u)
        density = np.abs(u_s) ** 2 + np.abs(u_t - gradient_values(problem.function, problem.theta, u)) ** 2
        return 0.5 * float(trapezoid(trapezoid(density, x=problem.grid.t, axis=1), x=problem.grid.s))

    def _action(self, gamma: Flowline) -> float:
        if gamma.is_constant:
            return 0.0
        return gamma.action if gamma.action is not None else self.flow.action(gamma)

    def stokes_value(self, problem: FloerProblem, field: FieldLike) -> float:
        """∮ u*λ around the rectangle plus ∫ [g_θ(u(S,t)) − g_θ(u(−S,t))] dt."""
        u = _values(field)
        s, t = problem.grid.s, problem.grid.t

        def edge(z: np.ndarray, x: np.ndarray) -> float:
            dz = np.gradient(z, x, edge_order=2)
            return float(trapezoid(0.5 * np.imag(np.conj(z) * dz), x=x))

        loop = edge(u[:, 0], s) + edge(u[-1, :], t) - edge(u[:, -1], s) - edge(u[0, :], t)
        g = problem.function.g_theta
        hamiltonian = float(trapezoid(g(u[-1, :], problem.theta) - g(u[0, :], problem.theta), x=t))
        return loop + hamiltonian

    def energy_identity_check(self, problem: FloerProblem, field: FieldLike) -> EnergyIdentityReport:
        """Compare E(u) with the action difference of the asymptotic flowlines."""
        energy = self.energy(problem, field)
        a0, a1 = self._action(problem.gamma0), self._action(problem.gamma1)
        gap = abs(energy - (a1 - a0))
        tolerance = self.settings.TOL_ENERGY_IDENTITY * (1.0 + abs(a0) + abs(a1))
        return EnergyIdentityReport(
            energy=energy,
            action_difference=a1 - a0,
            action0=a0,
            action1=a1,
            gap=gap,
            tolerance=tolerance,
            passed=gap < tolerance,
            stokes_value=self.stokes_value(problem, field),
        )

    def truncation_study(
        self, problem: FloerProblem, factors: Sequence[float] = (0.5, 0.75, 1.0)
    ) -> List[Dict[str, Any]]:
        """Identity gaps on rectangles scaled by each factor at fixed spacing."""
        rows: List[Dict[str, Any]] = []
        for factor in factors:
            scaled = problem.with_grid(problem.grid.scaled(factor))
            row: Dict[str, Any] = {"factor": float(factor), **scaled.grid.model_dump()}
            try:
                report = self.energy_identity_check(scaled, self.solve(scaled))
                row.update(energy=report.energy, gap=report.gap, passed=report.passed)
            except FsforgeError as e:
                row["error"] = e.to_dict()
            rows.append(row)
        return rows

    # ==================== Identities ====================

    def holomorphy_diagnostic(self, problem: FloerProblem, field: FieldLike) -> HolomorphyReport:
        """
        ∂̄(F∘u)/ρ(u) must equal (i/2)e^{iθ} wherever ρ(u) = |F'(u)|² exceeds RHO_FLOOR.

        ∂̄ is taken through the chain rule F'(u)·∂̄u; the difference quotient
        of F∘u itself is reported alongside.
        """
        u = _values(field)
        self._check_shape(problem, u)
        F, theta = problem.function, problem.theta
        v = F.value(u)
        expected = complex(0.5j * np.exp(1j * theta))

        boundary = np.ones(problem.shape, dtype=bool)
        boundary[1:-1, 1:-1] = False
        sup_interior = float(np.max(np.abs(v[~boundary])))
        sup_boundary = float(np.max(np.abs(v[boundary])))

        rho = np.abs(F.derivative(u)) ** 2
        admissible = (~boundary) & (rho > self.settings.RHO_FLOOR)
        count = int(np.count_nonzero(admissible))
        if count == 0:
            return HolomorphyReport(
                admissible_nodes=0,
                expected=expected,
                drift=0.0,
                sup_interior=sup_interior,
                sup_boundary=sup_boundary,
                passed=True,
                note="no admissible nodes",
            )

        u_s, u_t = self._derivatives(problem, u)
        dbar = F.derivative(u) * 0.5 * (u_s + 1j * u_t)
        drift = float(np.max(np.abs(dbar[admissible] / rho[admissible] - expected)))

        v_s, v_t = self._derivatives(problem, v)
        direct = 0.5 * (v_s + 1j * v_t)
        direct_drift = float(np.max(np.abs(direct[admissible] / rho[admissible] - expected)))

        return HolomorphyReport(
            admissible_nodes=count,
            expected=expected,
            drift=drift,
            direct_drift=direct_drift,
            sup_interior=sup_interior,
            sup_boundary=sup_boundary,
            passed=drift < self.settings.TOL_HOLOMORPHY,
        )

    def rotation_covariance_check(self, problem: FloerProblem, field: FieldLike, phi: float = np.pi / 2) -> RotationReport:
        """
        Resample u in coordinates z' = e^{iφ}z and evaluate the equation at angle θ + φ.

        The field is fitted with quintic splines and differentiated exactly,
        so the rotated residual measures the field against the continuum
        equation. It passes below TOL_ROTATION; the unrotated level and the
        covariance discrepancy are reported beside it.
        """
        u = _values(field)
        self._check_shape(problem, u)
        s, t = problem.grid.s, problem.grid.t
        re = RectBivariateSpline(s, t, u.real, kx=5, ky=5, s=0)
        im = RectBivariateSpline(s, t, u.imag, kx=5, ky=5, s=0)

        half = 0.9 * min(problem.grid.S, problem.grid.T) / np.sqrt(2.0)
        axis = np.linspace(-half, half, min(problem.grid.ns, problem.grid.nt))
        a, b = np.meshgrid(axis, axis, indexing="ij")
        z_rot = (a + 1j * b).ravel()

        def residual_at(z: np.ndarray, angle: float, rotation: float) -> np.ndarray:
            w = np.exp(-1j * rotation) * z
            ss, tt = w.real, w.imag
            uu = re.ev(ss, tt) + 1j * im.ev(ss, tt)
            us = re.ev(ss, tt, dx=1) + 1j * im.ev(ss, tt, dx=1)
            ut = re.ev(ss, tt, dy=1) + 1j * im.ev(ss, tt, dy=1)
            return np.exp(1j * rotation) * (us + 1j * ut) - 1j * gradient_values(problem.function, angle, uu)

        theta = problem.theta
        rotated = residual_at(z_rot, theta + phi, phi)
        original = residual_at(np.exp(-1j * phi) * z_rot, theta, 0.0)
        baseline = float(np.max(np.abs(residual_at(z_rot, theta, 0.0))))
        discrepancy = float(np.max(np.abs(rotated - np.exp(1j * phi) * original)))
        level = float(np.max(np.abs(rotated)))

        tolerance = self.settings.TOL_ROTATION
        passed = discrepancy < 1e-10 * (1.0 + level) and level < tolerance
        if not passed:
            logger.info(f"rotation check at phi={phi:.4f}: residual {level:.2e} against {tolerance:.1e}")
        return RotationReport(
            phi=float(phi),
            rotated_residual=level,
            baseline_residual=baseline,
            covariance_discrepancy=discrepancy,
            tolerance=tolerance,
            passed=bool(passed),
        )

    def witten_form_check(
        self,
        F: HolomorphicFunction,
        theta: float,
        n: int = 100,
        rng: Optional[np.random.Generator] = None,
    ) -> WittenFormReport:
        """
        Pointwise agreement of the two-component rewriting with the Floer form.

        ds-part: ∂_s u + J∂_t u − ∇g_θ, equal to the Floer expression;
        dt-part: ∂_t u − J∂_s u − ∇f_θ, equal to −i times it.
        """
        rng = rng if rng is not None else np.random.default_rng(self.settings.SEED)
        u = rng.uniform(-2.0, 2.0, n) + 1j * rng.uniform(-2.0, 2.0, n)
        u_s = rng.normal(size=n) + 1j * rng.normal(size=n)
        u_t = rng.normal(size=n) + 1j * rng.normal(size=n)

        G1 = np.exp(-1j * theta) * F.derivative(u)
        grad_f = np.conj(G1)
        grad_g = np.conj(-1j * G1)
        floer = u_s + 1j * (u_t - grad_f)
        ds_part = u_s + 1j * u_t - grad_g
        dt_part = u_t - 1j * u_s - grad_f

        ds_gap = float(np.max(np.abs(ds_part - floer)))
        dt_gap = float(np.max(np.abs(dt_part + 1j * floer)))
        return WittenFormReport(
            samples=n,
            ds_discrepancy=ds_gap,
            dt_discrepancy=dt_gap,
            passed=max(ds_gap, dt_gap) < 1e-12,
        )

    def gmw_energy(
        self, problem: FloerProblem, field: FieldLike, lambdas: Optional[Sequence[float]] = None
    ) -> GMWEnergyReport:
        """
        Energy of the rotation-invariant Hamiltonian perturbation on squares [-Λ, Λ]².

        Grows linearly in Λ on solutions; the fit is reported, nothing is asserted.
        """
        u = _values(field)
        s, t = problem.grid.s, problem.grid.t
        top = min(problem.grid.S, problem.grid.T)
        lambdas = tuple(float(x) for x in (lambdas if lambdas is not None else np.linspace(0.25, 1.0, 4) * top))
        if any(lam <= 0 or lam > top for lam in lambdas):
            raise PreconditionFailed("square side outside the rectangle", lambdas=list(lambdas), bound=top)

        u_s, u_t = self._derivatives(problem, u)
        grad_f = gradient_values(problem.function, problem.theta, u)
        density = np.abs(u_s - 0.5j * grad_f) ** 2 + np.abs(u_t - 0.5 * grad_f) ** 2

        energies = []
        for lam in lambdas:
            i = np.abs(s) <= lam + 1e-12
            j = np.abs(t) <= lam + 1e-12
            block = density[np.ix_(i, j)]
            energies.append(0.5 * float(trapezoid(trapezoid(block, x=t[j], axis=1), x=s[i])))

        slope, intercept = (np.polyfit(lambdas, energies, 1) if len(lambdas) > 1 else (0.0, energies[0]))
        return GMWEnergyReport(
            lambdas=lambdas,
            energies=tuple(energies),
            slope=float(slope),
            intercept=float(intercept),
        )

    # ==================== m1 ====================

    def m1_estimate(
        self,
        F: HolomorphicFunction,
        alpha: float,
        x0: int,
        x1: int,
        hom: Optional[HomBasis] = None,
        gradings: Optional[Sequence[Optional[int]]] = None,
        supplied_counts: Optional[Dict[Tuple[int, int], int]] = None,
        grid: Optional[FloerGrid] = None,
        seeds: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> M1Estimate:
        """
        Best-effort m1 on Hom(x0, x1): matrix M[target, source] over F2.

        Only generator pairs whose gradings differ by one are attempted.
        Supplied counts are taken as given. Each attempted entry counts
        clusters of multi-start solutions; it is HIGH confidence only when
        that count survives doubling the seeds and refining the grid.
        """
        hom = hom if hom is not None else self.flow.hom_basis(F, alpha, x0, x1)
        n = hom.rank
        if gradings is None:
            if hom.kind == HomKind.FLOWLINES:
                gradings = [self.transport.absolute_grading(f).grading for f in hom.flowlines]
            else:
                gradings = [0] * n
        gradings = list(gradings)
        if len(gradings) != n:
            raise PreconditionFailed("one grading per generator required", rank=n, gradings=len(gradings))

        matrix = np.zeros((n, n), dtype=int)
        entries: List[M1Entry] = []
        supplied_counts = dict(supplied_counts or {})
        for (a, b), count in supplied_counts.items():
            if not (0 <= a < n and 0 <= b < n):
                raise PreconditionFailed("supplied count outside the basis", pair=[a, b], rank=n)
            matrix[b, a] = int(count) % 2
            entries.append(
                M1Entry(source_generator=a, target_generator=b, count=int(count), confidence=Confidence.HIGH, supplied=True)
            )

        rng = np.random.default_rng(self.settings.SEED if seed is None else seed)
        for a in range(n):
            for b in range(n):
                if (a, b) in supplied_counts or gradings[a] is None or gradings[b] is None:
                    continue
                if gradings[b] - gradings[a] != 1:
                    continue
                entry = self._count_pair(F, hom, a, b, grid or self.default_grid(), seeds or self.settings.M1_SEEDS, rng)
                matrix[b, a] = entry.parity
                entries.append(entry)
                if entry.confidence == Confidence.LOW:
                    logger.warning(f"m1 entry {a}->{b} on Hom({x0},{x1}) is LOW confidence: {entry.counts_by_run}")

        return M1Estimate(
            source=x0,
            target=x1,
            generators=hom.generators,
            gradings=tuple(gradings),
            matrix=matrix,
            entries=tuple(entries),
        )

    def _count_pair(
        self,
        F: HolomorphicFunction,
        hom: HomBasis,
        a: int,
        b: int,
        grid: FloerGrid,
        seeds: int,
        rng: np.random.Generator,
    ) -> M1Entry:
        if len(hom.flowlines) <= max(a, b):
            return M1Entry(
                source_generator=a,
                target_generator=b,
                count=0,
                confidence=Confidence.LOW,
                errors=[{"error": "PreconditionFailed", "message": "generator has no flowline"}],
            )

        problem = self.build_problem(F, hom.theta, hom.flowlines[a], hom.flowlines[b], grid)
        errors: List[Dict[str, Any]] = []
        runs = {
            "base": (problem, seeds),
            "more_seeds": (problem, 2 * seeds),
            "refined": (problem.with_grid(grid.refined()), seeds),
        }
        counts: Dict[str, int] = {}
        for name, (p, k) in runs.items():
            counts[name], run_errors = self._multistart(p, k, rng)
            errors.extend({"run": name, **e} for e in run_errors)

        stable = len(set(counts.values())) == 1
        return M1Entry(
            source_generator=a,
            target_generator=b,
            count=counts["base"],
            confidence=Confidence.HIGH if stable else Confidence.LOW,
            counts_by_run=counts,
            errors=errors,
        )

    def _multistart(
        self, problem: FloerProblem, seeds: int, rng: np.random.Generator
    ) -> Tuple[int, List[Dict[str, Any]]]:
        """Number of distinct solutions found from perturbed interpolating guesses."""
        s, t = np.meshgrid(problem.grid.s, problem.grid.t, indexing="ij")
        bump = np.exp(-(s**2 + t**2))
        base = problem.boundary_data()
        weight = np.sqrt(problem.grid.hs * problem.grid.ht)

        representatives: List[np.ndarray] = []
        errors: List[Dict[str, Any]] = []
        for k in range(seeds):
            guess = base.copy()
            if k > 0:
                guess += self.settings.M1_BUMP * complex(rng.normal(), rng.normal()) * bump
            try:
                values = self.solve(problem, initial=guess).values
            except FsforgeError as e:
                errors.append({"seed": k, **e.to_dict()})
                continue
            if all(weight * np.linalg.norm(values - r) >= self.settings.M1_CLUSTER_TOL for r in representatives):
                representatives.append(values)
        return len(representatives), errors


floer_service = FloerService()
