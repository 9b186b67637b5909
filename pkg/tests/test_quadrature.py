import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from onsager_ms.quadrature import (
    DEFAULT_ORDER,
    SphereParams,
    build_sphere_quadrature,
    build_weighted_quadrature,
    integrate_mu,
    sphere_rule,
    surface_area,
    theta_rule,
)

PAIRS = [(n, k) for n in range(3, 9) for k in range(1, n)]


def polar_mass(n, k):
    return 0.5 * special.beta(k / 2.0, (n - k) / 2.0)


def test_sphere_params_validation():
    with pytest.raises(ValueError):
        SphereParams(2, 1)
    with pytest.raises(ValueError):
        SphereParams(4, 0)
    with pytest.raises(ValueError):
        SphereParams(4, 4)
    p = SphereParams(5, 2)
    assert p.complement == 3


def test_order_floor():
    with pytest.raises(ValueError):
        build_weighted_quadrature(SphereParams(4, 1), order=1)


@pytest.mark.parametrize("n,k", PAIRS)
def test_total_mass(n, k):
    rule = build_weighted_quadrature(SphereParams(n, k), order=24)
    assert rule.total_mass == pytest.approx(polar_mass(n, k), rel=1e-13)


@pytest.mark.parametrize("n,k", PAIRS)
def test_nodes_interior(n, k):
    rule = build_weighted_quadrature(SphereParams(n, k), order=16)
    assert np.all(rule.nodes > 0.0)
    assert np.all(rule.nodes < np.pi / 2.0)
    assert np.all(np.diff(rule.nodes) > 0.0)
    assert np.all(rule.weights > 0.0)
    assert np.allclose(rule.sin2, np.sin(rule.nodes) ** 2, atol=1e-15)


@given(
    pair=st.sampled_from(PAIRS),
    j=st.integers(min_value=0, max_value=15),
    order=st.integers(min_value=8, max_value=40),
)
@settings(max_examples=60, deadline=None)
def test_polynomial_exactness(pair, j, order):
    """Monomials in sin^2(theta) integrate exactly up to degree 2*order - 1."""
    n, k = pair
    if j > 2 * order - 1:
        return
    rule = build_weighted_quadrature(SphereParams(n, k), order=order)
    got = float(np.sum(rule.weights * rule.sin2**j))
    exact = 0.5 * special.beta((k + 2 * j) / 2.0, (n - k) / 2.0)
    assert got == pytest.approx(exact, rel=1e-12)


def test_integrate_mu_matches_manual_sum():
    params = SphereParams(5, 2)
    rule = build_weighted_quadrature(params, order=32)
    f = lambda th: np.cos(th) + 0.25 * np.sin(th) ** 2
    expected = float(np.sum(rule.weights * f(rule.nodes)))
    assert integrate_mu(rule, f) == pytest.approx(expected, rel=1e-15)


def test_integrate_mu_rejects_nonfinite():
    rule = build_weighted_quadrature(SphereParams(4, 1), order=8)
    with pytest.raises(ValueError):
        integrate_mu(rule, lambda th: np.where(th > 0.5, np.nan, 1.0))


def test_theta_rule_is_cached():
    a = theta_rule(4, 1, 32)
    b = theta_rule(4, 1, 32)
    assert a is b


def test_rule_arrays_are_frozen():
    rule = theta_rule(3, 1, 16)
    with pytest.raises(ValueError):
        rule.nodes[0] = 0.0
    with pytest.raises(ValueError):
        rule.weights[0] = 0.0


@pytest.mark.parametrize("d", range(2, 7))
def test_surface_area(d):
    assert surface_area(d) == pytest.approx(2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0), rel=1e-14)


@pytest.mark.parametrize("d", range(2, 7))
def test_sphere_rule_mass_and_moments(d):
    rule = sphere_rule(d, 12)
    w, pts = rule.weights, rule.points
    assert float(np.sum(w)) == pytest.approx(surface_area(d), rel=1e-12)
    sq = float(np.sum(w * pts[:, 0] ** 2))
    assert sq == pytest.approx(surface_area(d) / d, rel=1e-12)
    quart = float(np.sum(w * pts[:, 0] ** 4))
    assert quart == pytest.approx(3.0 * surface_area(d) / (d * (d + 2)), rel=1e-12)
    if d >= 2:
        cross = float(np.sum(w * pts[:, 0] ** 2 * pts[:, 1] ** 2))
        assert cross == pytest.approx(surface_area(d) / (d * (d + 2)), rel=1e-12)


def test_sphere_rule_odd_moments_vanish():
    rule = sphere_rule(3, 10)
    for i in range(3):
        assert abs(np.sum(rule.weights * rule.points[:, i])) < 1e-13
        assert abs(np.sum(rule.weights * rule.points[:, i] ** 3)) < 1e-13


def test_sphere_rule_no_zero_coordinates():
    # Zero coordinates would break the polar-angle recursion downstream.
    rule = sphere_rule(4, 8)
    assert float(np.min(np.abs(rule.points))) > 1e-12


def test_sphere_points_on_unit_sphere():
    rule = sphere_rule(5, 6)
    norms = np.linalg.norm(rule.points, axis=1)
    assert float(np.max(np.abs(norms - 1.0))) < 1e-13


def test_build_sphere_quadrature_dimension_cap():
    rule = build_sphere_quadrature(5, 8)
    assert rule.points.shape[1] == 5
    assert float(np.sum(rule.weights)) == pytest.approx(surface_area(5), rel=1e-12)
    with pytest.raises(ValueError):
        build_sphere_quadrature(9, 4)


def test_default_order_value():
    assert DEFAULT_ORDER == 128
