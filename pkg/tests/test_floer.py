# fsforge/tests/test_floer.py
import numpy as np
import pytest
from pydantic import ValidationError

from core.config import Settings
import floer.solver as solver
from core.exceptions import NoConvergence, PreconditionFailed, ShapeMismatch
from core.models import Confidence, HomKind
from floer.models import FloerGrid, field_report
from floer.service import FloerService
from flow.models import Flowline, HomBasis
from landscape.models import HolomorphicFunction

SMALL = FloerGrid(ns=32, nt=32)
CUBIC = HolomorphicFunction.from_coefficients([0, -1, 0, 1 / 3])


@pytest.fixture
def floer(settings):
    return FloerService(settings)


@pytest.fixture
def constant_problem(floer, cubic):
    x = Flowline.constant(cubic, np.pi, 0, -1.0)
    return floer.build_problem(cubic, np.pi, x, x, SMALL)


@pytest.fixture(scope="module")
def strip(cubic_flowline):
    """The s-independent strip over the cubic flowline, solved once."""
    service = FloerService(Settings())
    problem = service.build_problem(CUBIC, cubic_flowline.theta, cubic_flowline, cubic_flowline, FloerGrid(ns=48, nt=48))
    return service, problem, service.solve(problem)


@pytest.fixture(scope="module")
def fine_strip(cubic_flowline):
    service = FloerService(Settings())
    problem = service.build_problem(CUBIC, cubic_flowline.theta, cubic_flowline, cubic_flowline, FloerGrid(ns=128, nt=128))
    return service, problem, service.solve(problem)


def _s_independent(problem):
    """u(s, t) = γ(t) sampled on the problem grid."""
    return np.tile(problem.gamma0.evaluate(problem.grid.t), (problem.grid.ns, 1))


# ==================== grids ====================

def test_grid_bounds():
    with pytest.raises(ValidationError):
        FloerGrid(ns=8, nt=32)
    with pytest.raises(ValidationError):
        FloerGrid(S=0.0)


def test_grid_scaling_keeps_spacing():
    grid = FloerGrid(ns=64, nt=64)
    half = grid.scaled(0.5)
    assert half.S == pytest.approx(2.0)
    assert half.ns == 34
    assert half.hs == pytest.approx(grid.hs, rel=0.1)
    assert grid.refined().shape == (96, 96)


# ==================== problem setup ====================

def test_constant_strip_is_already_solved(floer, constant_problem):
    field = floer.solve(constant_problem)
    assert field.iterations == 0
    assert field.residual_norm < 1e-15
    assert field.energy == pytest.approx(0.0)
    np.testing.assert_allclose(field.values, -1.0)
    assert floer.stokes_value(constant_problem, field) == pytest.approx(0.0, abs=1e-14)

    report = floer.energy_identity_check(constant_problem, field)
    assert report.passed
    assert report.gap == pytest.approx(0.0)


def test_constant_strip_has_no_admissible_nodes(floer, constant_problem):
    field = floer.solve(constant_problem)
    report = floer.holomorphy_diagnostic(constant_problem, field)
    assert report.passed
    assert report.admissible_nodes == 0
    assert report.note == "no admissible nodes"


def test_flowline_at_another_angle_is_rejected(floer, cubic, cubic_flowline):
    with pytest.raises(PreconditionFailed):
        floer.build_problem(cubic, 0.0, cubic_flowline, cubic_flowline, SMALL)


def test_flowlines_with_other_endpoints_are_rejected(floer, cubic, cubic_flowline):
    stationary = Flowline.constant(cubic, np.pi, 0, -1.0)
    with pytest.raises(PreconditionFailed):
        floer.build_problem(cubic, np.pi, cubic_flowline, stationary, SMALL)


def test_boundary_blend_is_monotone(constant_problem):
    sigma = constant_problem.sigma()
    assert sigma[0] == 0.0
    assert sigma[-1] == pytest.approx(1.0)
    assert np.all(np.diff(sigma) > 0)


# ==================== residual and energy ====================

def test_residual_vanishes_on_the_boundary_ring(floer, constant_problem, rng):
    u = rng.normal(size=SMALL.shape) + 1j * rng.normal(size=SMALL.shape)
    R = floer.residual(constant_problem, u)
    assert np.max(np.abs(R[1:-1, 1:-1])) > 0
    for edge in (R[0], R[-1], R[:, 0], R[:, -1]):
        assert np.all(edge == 0)


def test_shape_mismatch(floer, constant_problem):
    with pytest.raises(ShapeMismatch):
        floer.residual(constant_problem, np.zeros((10, 10)))
    with pytest.raises(ShapeMismatch):
        floer.energy(constant_problem, np.zeros((32, 31)))


def test_energy_is_quadratic_near_a_constant(floer, constant_problem):
    s, t = np.meshgrid(SMALL.s, SMALL.t, indexing="ij")
    bump = np.exp(-(s**2 + t**2))
    small = floer.energy(constant_problem, -1.0 + 1e-3 * bump)
    large = floer.energy(constant_problem, -1.0 + 2e-3 * bump)
    assert small > 0
    assert large / small == pytest.approx(4.0, rel=1e-2)


def test_truncation_study_on_constant_strip(floer, constant_problem):
    rows = floer.truncation_study(constant_problem)
    assert [row["factor"] for row in rows] == [0.5, 0.75, 1.0]
    assert [row["ns"] for row in rows] == [18, 24, 32]
    assert all(row["passed"] for row in rows)


# ==================== s-independent solution ====================

def test_s_independent_solve(strip, cubic_flowline):
    service, problem, field = strip
    assert field.converged
    assert field.residual_norm < 1e-8 * np.sqrt(48 * 48)
    assert 0.0 <= field.energy < 0.5
    expected = cubic_flowline.evaluate(problem.grid.t)
    assert np.max(np.abs(field.values - expected[None, :])) < 0.2
    assert np.max(np.abs(service.residual(problem, field))) < 1e-6


def test_holomorphy_of_solution(strip):
    service, problem, field = strip
    report = service.holomorphy_diagnostic(problem, field)
    assert report.admissible_nodes > 0
    assert report.expected == pytest.approx(0.5j * np.exp(1j * problem.theta))
    assert report.passed

    s, t = np.meshgrid(problem.grid.s, problem.grid.t, indexing="ij")
    perturbed = field.values + 0.05 * np.exp(-(s**2 + t**2))
    assert not service.holomorphy_diagnostic(problem, perturbed).passed


def test_rotation_covariance(strip):
    service, problem, field = strip
    report = service.rotation_covariance_check(problem, field)
    assert report.phi == pytest.approx(np.pi / 2)
    assert report.covariance_discrepancy < 1e-10 * (1.0 + report.baseline_residual)
    assert report.tolerance == service.settings.TOL_ROTATION


@pytest.mark.parametrize("phi", [np.pi / 6, np.pi / 2])
def test_rotated_flowline_strip_passes(fine_strip, phi):
    service, problem, _ = fine_strip
    report = service.rotation_covariance_check(problem, _s_independent(problem), phi=phi)
    assert report.phi == pytest.approx(phi)
    assert report.rotated_residual < service.settings.TOL_ROTATION
    assert report.covariance_discrepancy < 1e-10 * (1.0 + report.baseline_residual)
    assert report.passed


def test_rotation_check_fails_on_a_perturbed_field(fine_strip):
    service, problem, _ = fine_strip
    s, t = np.meshgrid(problem.grid.s, problem.grid.t, indexing="ij")
    perturbed = _s_independent(problem) + 1e-2 * np.exp(-(s**2 + t**2))
    report = service.rotation_covariance_check(problem, perturbed, phi=np.pi / 6)
    assert report.rotated_residual > service.settings.TOL_ROTATION
    assert not report.passed


# ==================== convergence ====================

def test_residual_is_second_order(floer, cubic_flowline):
    levels = []
    for n in (64, 128, 256):
        problem = floer.build_problem(CUBIC, cubic_flowline.theta, cubic_flowline, cubic_flowline, FloerGrid(ns=n, nt=n))
        levels.append(float(np.max(np.abs(floer.residual(problem, _s_independent(problem))))))
    levels = np.array(levels)
    assert np.all(np.diff(levels) < 0)
    assert np.all(np.log2(levels[:-1] / levels[1:]) >= 1.8)


def test_fine_grid_solve(fine_strip):
    service, problem, field = fine_strip
    assert field.converged
    assert field.residual_norm < 1e-8 * 128
    report = service.energy_identity_check(problem, field)
    assert report.passed
    assert report.gap < report.tolerance


def test_energy_identity_on_non_constant_strip(strip):
    service, problem, field = strip
    assert np.ptp(field.values.real) > 1.5
    report = service.energy_identity_check(problem, field)
    assert report.energy == pytest.approx(field.energy)
    assert report.action_difference == pytest.approx(0.0, abs=1e-12)
    assert report.gap < report.tolerance
    assert report.passed


def test_identity_gap_does_not_grow_with_the_rectangle(strip):
    service, problem, _ = strip
    small, large = service.truncation_study(problem, factors=(1.0, 2.0))
    assert large["S"] == pytest.approx(2.0 * small["S"])
    assert small["passed"] and large["passed"]
    assert large["gap"] <= 1.1 * small["gap"] + 1e-7


def test_stalled_line_search_stops(monkeypatch, constant_problem):
    monkeypatch.setattr(solver, "_newton_step", lambda J, rhs: np.zeros_like(rhs))
    u0 = constant_problem.boundary_data()
    u0[1:-1, 1:-1] += 0.1
    with pytest.raises(NoConvergence) as exc:
        solver.gauss_newton(CUBIC, np.pi, u0, SMALL.hs, SMALL.ht, 1e-8, 5, 100.0)
    assert exc.value.context["iteration"] == 0


def test_gmw_energy_report(strip, floer, constant_problem):
    service, problem, field = strip
    report = service.gmw_energy(problem, field)
    assert len(report.energies) == len(report.lambdas) == 4
    assert all(e >= 0 for e in report.energies)
    assert list(report.energies) == sorted(report.energies)

    flat = floer.gmw_energy(constant_problem, floer.solve(constant_problem))
    assert flat.energies == pytest.approx((0.0,) * 4)
    with pytest.raises(PreconditionFailed):
        floer.gmw_energy(constant_problem, floer.solve(constant_problem), lambdas=[5.0])


def test_field_report(strip):
    _, problem, field = strip
    report = field_report(problem, field)
    assert len(report["values"]) == 48 * 48
    assert report["x0"] == 0 and report["x1"] == 1


# ==================== Witten form ====================

def test_witten_form_agrees(floer, cubic, quartic, rng):
    assert floer.witten_form_check(cubic, 0.7, rng=rng).passed
    report = floer.witten_form_check(quartic, np.pi / 3, n=50, rng=rng)
    assert report.samples == 50
    assert report.passed


# ==================== m1 ====================

def test_m1_on_rank_one_hom(floer, cubic):
    estimate = floer.m1_estimate(cubic, np.pi / 2, 0, 1, gradings=[0])
    np.testing.assert_array_equal(estimate.matrix, [[0]])
    assert estimate.entries == ()
    assert estimate.confidence == Confidence.HIGH


def test_m1_with_supplied_counts(floer, cubic):
    hom = HomBasis(source=0, target=1, kind=HomKind.FLOWLINES, generators=("a", "b"), theta=np.pi)
    estimate = floer.m1_estimate(cubic, np.pi / 2, 0, 1, hom=hom, gradings=[0, 1], supplied_counts={(0, 1): 3})
    np.testing.assert_array_equal(estimate.matrix, [[0, 0], [1, 0]])
    assert estimate.confidence == Confidence.HIGH
    assert estimate.entries[0].supplied


def test_m1_without_flowlines_is_low_confidence(floer, cubic):
    hom = HomBasis(source=0, target=1, kind=HomKind.FLOWLINES, generators=("a", "b"), theta=np.pi)
    estimate = floer.m1_estimate(cubic, np.pi / 2, 0, 1, hom=hom, gradings=[0, 1])
    assert estimate.confidence == Confidence.LOW
    assert estimate.confidence_matrix()[1, 0] == Confidence.LOW.value
    np.testing.assert_array_equal(estimate.matrix, [[0, 0], [0, 0]])


def test_m1_rejects_bad_input(floer, cubic):
    hom = HomBasis(source=0, target=1, kind=HomKind.FLOWLINES, generators=("a", "b"), theta=np.pi)
    with pytest.raises(PreconditionFailed):
        floer.m1_estimate(cubic, np.pi / 2, 0, 1, hom=hom, gradings=[0])
    with pytest.raises(PreconditionFailed):
        floer.m1_estimate(cubic, np.pi / 2, 0, 1, hom=hom, gradings=[0, 1], supplied_counts={(0, 2): 1})
