# fsforge/tests/test_flow.py
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import quad, trapezoid

from core.exceptions import FlowlineRejected, InteriorCriticalValue, PreconditionFailed
from core.models import HomKind, Termination
from flow.models import ConnectionResult, FlowPath, ShootingConfig, connection_report
from flow.service import FlowService, exponential_tail
from landscape.models import HolomorphicFunction, SeparableFunction
from landscape.service import LandscapeService


@pytest.fixture
def flow(settings):
    return FlowService(settings)


# ==================== vector field ====================

def test_gradient_field(quadratic, cubic):
    assert FlowService.gradient_field(quadratic, 0.0, 1 + 1j) == pytest.approx(1 - 1j)
    assert FlowService.gradient_field(cubic, 0.4, 1.0) == pytest.approx(0.0)
    linear = HolomorphicFunction.from_coefficients([0, 1])
    assert FlowService.gradient_field(linear, np.pi / 2, 3 - 2j) == pytest.approx(1j)


def test_unstable_directions(settings, quadratic, cubic):
    x = LandscapeService(settings).critical_points(quadratic)[0]
    d, e = FlowService.unstable_directions(x, 0.0)
    assert d == pytest.approx(1.0)
    assert e == pytest.approx(-1.0)

    plus_one = LandscapeService(settings).critical_points(cubic)[1]
    d, _ = FlowService.unstable_directions(plus_one, 0.0)
    assert abs(d.imag) == pytest.approx(0.0, abs=1e-15)


def test_rotating_theta_rotates_directions_by_half(settings, cubic):
    x = LandscapeService(settings).critical_points(cubic)[1]
    d0, _ = FlowService.unstable_directions(x, 0.3)
    d1, _ = FlowService.unstable_directions(x, 0.3 + 0.8)
    # lines, so compare modulo pi
    delta = np.mod(np.angle(d1) - np.angle(d0), np.pi)
    assert delta == pytest.approx(0.4)


# ==================== integration ====================

def test_real_axis_flow_is_captured(flow, cubic):
    path = flow.integrate_flow(cubic, 0.0, 0.999)
    assert path.termination == Termination.CAPTURED
    assert path.captured_index == 0
    assert path.drift < 1e-10
    assert np.all(np.diff(path.times) > 0)


def test_off_level_flow_runs_away(flow, cubic):
    path = flow.integrate_flow(cubic, 0.0, 1 + 0.5j)
    assert path.termination == Termination.RUNAWAY
    assert path.captured_index is None


def test_start_at_critical_point(flow, cubic):
    with pytest.raises(PreconditionFailed):
        flow.integrate_flow(cubic, 0.0, 1.0)


def test_shooting_config_radii():
    with pytest.raises(ValidationError):
        ShootingConfig(launch_radius=1e-2, capture_radius=1e-3)


# ==================== connections ====================

def test_cubic_connection_count(flow, cubic, oracles):
    forward = flow.find_connections(cubic, 1, 0)
    assert forward.count == oracles["cubic"]["connection_counts"]["1,0"]
    assert forward.count_mod2 == 1
    assert forward.theta == pytest.approx(0.0)
    assert sorted(forward.ray_outcomes) == ["captured:0", "runaway"]


def test_cubic_flowline_invariants(cubic_connection, cubic_flowline, oracles):
    assert cubic_connection.count == oracles["cubic"]["connection_counts"]["0,1"]
    assert cubic_connection.theta == pytest.approx(np.pi)
    assert cubic_flowline.conserved_drift < 1e-8
    assert cubic_flowline.segment_deviation < 1e-6
    assert cubic_flowline.monotone
    # the real segment
    assert np.max(np.abs(cubic_flowline.points.imag)) < 1e-12


def test_speed_law(flow, cubic_flowline):
    assert flow.speed_law_residual(cubic_flowline) < 1e-6
    report = flow.straightness(cubic_flowline)
    assert report["monotone"]
    assert report["max_radius"] == pytest.approx(1.0, abs=1e-2)


def test_action_of_real_segment(flow, cubic_flowline, oracles):
    assert cubic_flowline.action == pytest.approx(oracles["cubic"]["action"], abs=1e-12)
    assert flow.action(cubic_flowline.shifted(3.5)) == pytest.approx(cubic_flowline.action, abs=1e-9)


def test_exponential_tail_matches_quadrature():
    rate, edge = 3.0, 2.5e-7
    exact = quad(lambda s: edge * np.exp(-2.0 * rate * s), 0.0, np.inf)[0]
    assert exponential_tail(edge, rate) == pytest.approx(exact, rel=1e-8)


def test_action_tails_make_truncation_harmless(cubic_flowline):
    # the drift term near x decays like the squared distance, at rate 2|F''(x)|
    lam = cubic_flowline.endpoint_rates()[0]
    t = np.linspace(-8.0, 0.0, 8001)
    h = 1e-6 * np.exp(2.0 * lam * t)
    full = trapezoid(h, x=t) + exponential_tail(float(h[0]), lam)
    cut = t >= -2.0
    truncated = trapezoid(h[cut], x=t[cut]) + exponential_tail(float(h[cut][0]), lam)
    assert full == pytest.approx(1e-6 / (2.0 * lam), rel=1e-5)
    assert truncated == pytest.approx(full, rel=1e-5)


def test_evaluate_is_centered_and_tends_to_endpoints(cubic_flowline):
    mid = cubic_flowline.evaluate(0.0)
    assert mid.real == pytest.approx(0.0, abs=1e-3)
    far = cubic_flowline.evaluate(np.array([-50.0, 50.0]))
    np.testing.assert_allclose(far, [-1.0, 1.0], atol=1e-12)


def test_interior_critical_value_blocks_the_segment(flow):
    # F' = (z^2 - 1)(z^2 - 4): four real critical values on one line
    F = HolomorphicFunction.from_coefficients([0, 4, 0, -5 / 3, 0, 1 / 5])
    with pytest.raises(InteriorCriticalValue) as exc:
        flow.find_connections(F, 1, 2)
    assert exc.value.context["blocking"] in (0, 3)


def test_equal_values_are_rejected(flow, cubic):
    with pytest.raises(PreconditionFailed):
        flow.find_connections(cubic, 0, 0)


# ==================== Hom spaces ====================

def test_hom_basis(flow, cubic):
    identity = flow.hom_basis(cubic, np.pi / 2, 0, 0)
    assert identity.kind == HomKind.IDENTITY
    assert identity.generators == ("id[0]",)

    zero = flow.hom_basis(cubic, np.pi / 2, 1, 0)
    assert zero.kind == HomKind.ZERO
    assert zero.rank == 0

    forward = flow.hom_basis(cubic, np.pi / 2, 0, 1)
    assert forward.kind == HomKind.FLOWLINES
    assert forward.generators == ("g[0->1]#0",)
    assert forward.theta == pytest.approx(np.pi)


def test_connection_table_keeps_input_order(flow, cubic):
    table = flow.connection_table(cubic, [(1, 0), (0, 1)], jobs=1)
    assert [pair for pair, _ in table] == [(1, 0), (0, 1)]
    assert all(isinstance(outcome, ConnectionResult) for _, outcome in table)
    report = connection_report(table[0][1], with_samples=False)
    assert report["count"] == 1
    assert "samples" not in report["flowlines"][0]


def test_connection_table_records_errors(flow):
    F = HolomorphicFunction.from_coefficients([0, 4, 0, -5 / 3, 0, 1 / 5])
    table = flow.connection_table(F, [(1, 2)], jobs=1)
    assert table[0][1]["error"] == "InteriorCriticalValue"


def test_quartic_counts_are_rotation_symmetric(flow, quartic):
    # F(wz) = wF(z) for w^3 = 1, so every pair sees the same picture
    counts = {frozenset(p): flow.find_connections(quartic, *p).count for p in [(0, 1), (1, 2), (2, 0)]}
    assert len(set(counts.values())) == 1


def test_quartic_counts_match_oracle(settings, quartic_connections, oracles):
    expected = oracles["quartic"]["connection_counts"]
    for (x, y), connection in quartic_connections.items():
        assert connection.count == expected[f"{x},{y}"]
        for flowline in connection.flowlines:
            assert flowline.conserved_drift <= settings.TOL_CONSERVE
            assert flowline.monotone


def test_backwards_path_is_rejected(settings, flow, cubic, cubic_flowline):
    crit = LandscapeService(settings).critical_points(cubic)
    reversed_path = FlowPath(
        theta=cubic_flowline.theta,
        times=cubic_flowline.times,
        points=cubic_flowline.points[::-1],
        termination=Termination.CAPTURED,
        captured_index=1,
        drift=0.0,
        drift_bound=1.0,
        steps=len(cubic_flowline.times),
    )
    with pytest.raises(FlowlineRejected) as exc:
        flow._accept(cubic, cubic_flowline.theta, crit, 0, 1, 0, reversed_path)
    assert exc.value.context["decrease"] > 0


# ==================== separable C^2 ====================

def test_product_connection_with_frozen_component(flow, cubic, quadratic):
    G = SeparableFunction(components=(cubic, quadratic))
    connections = flow.find_product_connections(G, 0, 1)
    assert len(connections) == 1
    assert connections[0].moving == 0
    assert connections[0].frozen_point == pytest.approx(0.0)


def test_product_connection_with_two_moving_components(flow, cubic):
    rotated = HolomorphicFunction.from_coefficients([0, -1j, 0, 1j / 3])
    G = SeparableFunction(components=(cubic, rotated))
    assert flow.find_product_connections(G, 0, 3) == []
