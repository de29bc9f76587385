# fsforge/tests/test_landscape.py
import numpy as np
import pytest

from core.exceptions import (
    AmbiguousOrdering,
    DegenerateValues,
    NonMorse,
    PreconditionFailed,
    ValueAtOrigin,
    ValueOnRay,
)
from landscape.geometry import convex_hull, interior_witness
from landscape.models import CriticalDatum, HolomorphicFunction, SeparableFunction
from landscape.service import LandscapeService, wrap_angle


def _complex(pairs):
    return np.array([complex(a, b) for a, b in pairs])


def _crit(values):
    return [CriticalDatum(index=k, point=complex(k), value=w, hessian=1.0) for k, w in enumerate(values)]


@pytest.fixture
def landscape(settings):
    return LandscapeService(settings)


# ==================== critical_points ====================

def test_cubic_critical_data(landscape, cubic, oracles):
    crit = landscape.critical_points(cubic)
    expected = oracles["cubic"]
    assert [c.index for c in crit] == [0, 1]
    np.testing.assert_allclose([c.point for c in crit], _complex(expected["points"]), atol=1e-12)
    np.testing.assert_allclose([c.value for c in crit], _complex(expected["values"]), atol=1e-12)
    np.testing.assert_allclose([c.hessian for c in crit], _complex(expected["hessians"]), atol=1e-12)


def test_quartic_critical_points_are_cube_roots(landscape, quartic, oracles):
    crit = landscape.critical_points(quartic)
    points = np.array([c.point for c in crit])
    np.testing.assert_allclose(points**3, np.ones(3), atol=1e-12)
    np.testing.assert_allclose(points, _complex(oracles["quartic"]["points"]), atol=1e-12)
    np.testing.assert_allclose([c.value for c in crit], -0.75 * points, atol=1e-12)


def test_single_critical_point(landscape):
    crit = landscape.critical_points(HolomorphicFunction.from_coefficients([0, 0, 1]))
    assert len(crit) == 1
    assert crit[0].point == pytest.approx(0.0)
    assert crit[0].value == pytest.approx(0.0)
    assert crit[0].hessian == pytest.approx(2.0)


def test_degree_one_is_rejected(landscape):
    with pytest.raises(PreconditionFailed):
        landscape.critical_points(HolomorphicFunction.from_coefficients([0, 1]))


def test_repeated_root_is_not_morse(landscape):
    with pytest.raises(NonMorse):
        landscape.critical_points(HolomorphicFunction.from_coefficients([0, 0, 0, 1 / 3]))


def test_colliding_values(landscape):
    # z^4/4 - z^2/2 has F(1) = F(-1)
    with pytest.raises(DegenerateValues) as exc:
        landscape.critical_points(HolomorphicFunction.from_coefficients([0, 0, -0.5, 0, 0.25]))
    assert exc.value.code == "DegenerateValues"


def test_nonpositive_tolerance(landscape, cubic):
    with pytest.raises(PreconditionFailed):
        landscape.critical_points(cubic, tol=0.0)


def test_translated_and_rotated(cubic):
    shifted = cubic.translated(0.25j)
    assert shifted.value(0.0) == pytest.approx(0.25j)
    rotated = cubic.rotated(np.pi / 2)
    assert rotated.value(2.0) == pytest.approx(-1j * cubic.value(2.0))


# ==================== phase_geometry ====================

def test_cubic_order(landscape, cubic, oracles):
    geometry = landscape.phase_geometry(landscape.critical_points(cubic), np.pi / 2)
    assert list(geometry.order) == oracles["cubic"]["order_at_half_pi"]
    np.testing.assert_allclose(geometry.clockwise_angles, oracles["cubic"]["clockwise_angles_at_half_pi"], atol=1e-12)
    assert geometry.precedes(0, 1)
    assert not geometry.precedes(1, 0)
    assert geometry.convex


def test_slopes_are_antipodal(landscape, quartic):
    geometry = landscape.phase_geometry(landscape.critical_points(quartic), np.pi / 2)
    for i in range(3):
        for j in range(3):
            if i != j:
                diff = np.angle(np.exp(1j * (geometry.slopes[i, j] - geometry.slopes[j, i])))
                assert abs(diff) == pytest.approx(np.pi)
    assert np.isnan(geometry.slopes[0, 0])


def test_triangle_is_convex(landscape, quartic):
    geometry = landscape.phase_geometry(landscape.critical_points(quartic), np.pi / 2)
    assert geometry.convex
    assert geometry.interior_witness is None


def test_interior_value_is_witnessed(landscape):
    values = [-1 + 0.05j, 0.1 + 0.05j, 1 + 0.05j]
    geometry = landscape.phase_geometry(_crit(values), 1.0)
    assert not geometry.convex
    assert geometry.interior_witness == 1


def test_value_on_ray(landscape, cubic):
    with pytest.raises(ValueOnRay) as exc:
        landscape.phase_geometry(landscape.critical_points(cubic), 0.0)
    assert exc.value.to_dict()["error"] == "ValueOnRay"


def test_value_at_origin(landscape):
    crit = landscape.critical_points(HolomorphicFunction.from_coefficients([0, 0, 1]))
    with pytest.raises(ValueAtOrigin):
        landscape.phase_geometry(crit, 1.0)


def test_shared_argument_is_ambiguous(landscape):
    with pytest.raises(AmbiguousOrdering):
        landscape.phase_geometry(_crit([1 + 1j, 2 + 2j]), 0.0)


def test_wrap_angle():
    assert wrap_angle(-0.1) == pytest.approx(2 * np.pi - 0.1)
    assert wrap_angle(2 * np.pi) == pytest.approx(0.0)


def test_convex_hull_drops_interior_points():
    hull = convex_hull([0, 1, 1j, 1 + 1j, 0.5 + 0.5j])
    assert len(hull) == 4
    assert interior_witness([0, 2, 2j, 0.5 + 0.5j], 1e-9) == 3


# ==================== conformal factor and bracket ====================

def test_conformal_factor(landscape, quadratic, cubic):
    assert landscape.conformal_factor(quadratic, 1 + 1j) == pytest.approx(2.0)
    assert landscape.conformal_factor(cubic, 1.0) == pytest.approx(0.0)
    assert landscape.conformal_factor(cubic, 0.0) == pytest.approx(1.0)


def test_bracket_matches_conformal_factor(landscape, quadratic, cubic, rng):
    assert landscape.poisson_bracket(quadratic, 0.3, 1.0) == pytest.approx(1.0)
    z = rng.uniform(-2, 2, 50) + 1j * rng.uniform(-2, 2, 50)
    np.testing.assert_allclose(landscape.poisson_bracket(cubic, 1.1, z), landscape.conformal_factor(cubic, z), rtol=1e-12)


def test_gradient_like_on_random_samples(landscape, cubic, rng):
    z = rng.uniform(-2, 2, 300) + 1j * rng.uniform(-2, 2, 300)
    z = z[np.min(np.abs(z[:, None] - np.array([-1, 1])[None, :]), axis=1) > 0.05][:100]
    report = landscape.check_gradient_like(cubic, 0.7, z)
    assert report.passed
    assert report.n_samples == 100
    assert report.min_bracket > 0
    assert report.max_bracket_mismatch < 1e-10
    assert report.critical_agreement
    assert report.unmatched == ()


def test_gradient_like_rejects_samples_near_critical_points(landscape, cubic):
    with pytest.raises(PreconditionFailed):
        landscape.check_gradient_like(cubic, 0.0, [1.0 + 1e-6, 0.5j])


# ==================== separable functions ====================

def test_separable_critical_points(landscape, cubic, quadratic):
    G = SeparableFunction(components=(cubic, quadratic))
    crit = landscape.separable_critical_points(G)
    assert [c.components for c in crit] == [(0, 0), (1, 0)]
    np.testing.assert_allclose([c.value for c in crit], [2 / 3, -2 / 3], atol=1e-12)
    assert crit[1].hessians == (pytest.approx(2.0), pytest.approx(1.0))
