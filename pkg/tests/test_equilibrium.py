import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from onsager_ms.equilibrium import (
    MAX_FULL_SPHERE_DIM,
    CriticalPointSpec,
    OrderTensor,
    critical_point,
    density,
    eigenvalue_structure,
    euler_lagrange_residual,
    fixed_point_map,
    isotropic_point,
    log_density,
    solve_fixed_point,
    sphere_order_for,
)
from onsager_ms.quadrature import SphereParams, sphere_rule
from onsager_ms.sigma import sigma_value


def test_order_tensor_rejects_asymmetric():
    a = np.zeros((3, 3))
    a[0, 1] = 1.0
    with pytest.raises(ValueError):
        OrderTensor(3, a)


def test_order_tensor_rejects_trace():
    with pytest.raises(ValueError):
        OrderTensor(3, np.diag([1.0, 0.0, 0.0]))


def test_order_tensor_entries_frozen():
    t = OrderTensor.zero(4)
    with pytest.raises(ValueError):
        t.entries[0, 0] = 1.0


def test_axial_tensor_structure():
    params = SphereParams(5, 2)
    t = OrderTensor.axial(params, 3.0)
    lam = np.sort(t.eigenvalues())
    assert abs(np.trace(t.entries)) < 1e-12
    assert lam[:3] == pytest.approx([-3.0 * 2 / 5] * 3)
    assert lam[3:] == pytest.approx([3.0 * 3 / 5] * 2)


@given(n=st.integers(min_value=3, max_value=6), seed=st.integers(min_value=0, max_value=2**31))
@settings(max_examples=25, deadline=None)
def test_random_unit_is_unit_trace_free(n, seed):
    t = OrderTensor.random_unit(n, np.random.default_rng(seed))
    assert t.frobenius_norm() == pytest.approx(1.0, rel=1e-12)
    assert abs(np.trace(t.entries)) < 1e-12


def test_random_unit_deterministic():
    a = OrderTensor.random_unit(4, np.random.default_rng(11))
    b = OrderTensor.random_unit(4, np.random.default_rng(11))
    assert np.array_equal(a.entries, b.entries)


def test_spec_requires_branch_alpha():
    params = SphereParams(4, 1)
    good = sigma_value(params, 2.0)
    CriticalPointSpec(params, 2.0, good)
    with pytest.raises(ValueError):
        CriticalPointSpec(params, 2.0, good * 1.01)


def test_spec_rejects_nonorthogonal_rotation():
    params = SphereParams(3, 1)
    with pytest.raises(ValueError):
        CriticalPointSpec(params, 0.0, 5.0, rotation=np.diag([2.0, 1.0, 1.0]))


def test_isotropic_point_accepts_any_alpha():
    spec = isotropic_point(5, 3.0)
    assert spec.eta == 0.0
    assert spec.alpha == 3.0


def test_density_normalized():
    spec = critical_point(SphereParams(3, 1), 4.0)
    rule = sphere_rule(3, 24)
    mass = float(np.sum(rule.weights * density(spec, rule.points)))
    assert mass == pytest.approx(1.0, rel=1e-12)


def test_density_positive_and_log_consistent():
    spec = critical_point(SphereParams(4, 2), -2.0)
    rule = sphere_rule(4, 12)
    f = density(spec, rule.points)
    assert np.all(f > 0)
    assert np.allclose(np.log(f), log_density(spec, rule.points), atol=1e-12)


def test_density_rotation_equivariance():
    """density with rotation R at m equals the unrotated density at R m."""
    rng = np.random.default_rng(0)
    R = special_ortho_group.rvs(4, random_state=rng)
    params = SphereParams(4, 1)
    base = critical_point(params, 2.5)
    rotated = CriticalPointSpec(params, 2.5, base.alpha, rotation=R)
    m = rng.normal(size=4)
    m /= np.linalg.norm(m)
    assert density(rotated, m) == pytest.approx(density(base, R @ m), rel=1e-12)


def test_density_rejects_off_sphere_points():
    spec = isotropic_point(3, 1.0)
    with pytest.raises(ValueError):
        density(spec, np.array([1.0, 1.0, 0.0]))


def test_euler_lagrange_residual_discriminates():
    spec = critical_point(SphereParams(4, 1), 3.0)
    assert euler_lagrange_residual(spec) < 1e-10
    assert euler_lagrange_residual(spec, alpha=1.1 * spec.alpha) > 1e-3


def test_euler_lagrange_residual_isotropic():
    assert euler_lagrange_residual(isotropic_point(3, 5.0)) < 1e-12


def test_sphere_order_grows_then_caps():
    assert sphere_order_for(3, 10.0) < sphere_order_for(3, 60.0)
    assert sphere_order_for(3, 1e6) == sphere_order_for(3, 1e7)
    with pytest.raises(ValueError):
        sphere_order_for(MAX_FULL_SPHERE_DIM + 1, 10.0)


def test_axial_branch_is_fixed_point():
    """The axial tensor built from sigma_k(eta) = alpha reproduces itself.

    This crosses two independent quadratures: the full-sphere product rule
    inside the map versus the 1-d polar rule behind sigma.
    """
    params = SphereParams(4, 1)
    eta = 2.0
    alpha = sigma_value(params, eta)
    t = OrderTensor.axial(params, eta)
    image = fixed_point_map(t, alpha)
    assert np.allclose(image.entries, t.entries, atol=1e-10)


def test_solve_fixed_point_subcritical_reaches_zero():
    # Below n(n+2)/2 the isotropic state is the only attractor.
    res = solve_fixed_point(3, 5.0, OrderTensor.random_unit(3, np.random.default_rng(1)))
    assert res.converged
    assert res.tensor.frobenius_norm() < 1e-8


def test_solve_fixed_point_supercritical():
    res = solve_fixed_point(3, 20.0, OrderTensor.random_unit(3, np.random.default_rng(2)))
    assert res.converged
    assert res.residual < 1e-10
    struct = eigenvalue_structure(res.tensor)
    assert struct.count == 2
    assert not struct.ambiguous


def test_solve_fixed_point_deterministic():
    start = OrderTensor.random_unit(4, np.random.default_rng(5))
    a = solve_fixed_point(4, 30.0, start)
    b = solve_fixed_point(4, 30.0, start)
    assert np.array_equal(a.tensor.entries, b.tensor.entries)
    assert a.iterations == b.iterations


def test_solve_fixed_point_recovers_branch():
    res = solve_fixed_point(5, 40.0, OrderTensor.random_unit(5, np.random.default_rng(3)))
    struct = eigenvalue_structure(res.tensor)
    assert struct.count == 2
    (v_low, v_high) = struct.values
    (m_low, m_high) = struct.multiplicities
    assert m_high * v_high + m_low * v_low == pytest.approx(0.0, abs=1e-10)
    eta = v_high - v_low
    assert sigma_value(SphereParams(5, m_high), eta) == pytest.approx(40.0, rel=1e-8)


def test_solve_fixed_point_damping_same_limit():
    start = OrderTensor.random_unit(3, np.random.default_rng(8))
    plain = solve_fixed_point(3, 20.0, start)
    damped = solve_fixed_point(3, 20.0, start, damping=0.5)
    assert damped.converged
    assert np.allclose(plain.tensor.entries, damped.tensor.entries, atol=1e-8)


def test_solve_fixed_point_guards():
    start = OrderTensor.random_unit(3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        solve_fixed_point(3, 20.0, start, tol=1e-14)
    with pytest.raises(ValueError):
        solve_fixed_point(3, -1.0, start)
    with pytest.raises(ValueError):
        solve_fixed_point(7, 20.0, OrderTensor.random_unit(7, np.random.default_rng(0)))
    with pytest.raises(ValueError):
        solve_fixed_point(4, 20.0, start)


def test_eigenvalue_structure_isotropic_single_cluster():
    struct = eigenvalue_structure(OrderTensor.zero(4))
    assert struct.count == 1
    assert struct.multiplicities == (4,)


def test_eigenvalue_structure_axial_clusters():
    t = OrderTensor.axial(SphereParams(6, 2), 5.0)
    struct = eigenvalue_structure(t)
    assert struct.count == 2
    assert struct.multiplicities == (4, 2)
    assert not struct.ambiguous


def test_eigenvalue_structure_flags_near_threshold():
    t = OrderTensor.axial(SphereParams(4, 2), 2e-6)
    struct = eigenvalue_structure(t)
    assert struct.ambiguous
