import numpy as np
import pytest

from onsager_ms.moments import moment
from onsager_ms.quadrature import SphereParams
from onsager_ms.sigma import find_eta_star, sigma_value
from onsager_ms.spectral import (
    BLOCK_FAMILIES,
    block_spectrum,
    family_multiplicities,
    full_spectrum,
    gap_estimate,
    isotropic_threshold,
)
from onsager_ms.stability import d_quantities


def test_family_multiplicities():
    counts = family_multiplicities(SphereParams(5, 2))
    assert counts == {"Omega_A": 1, "Omega_B": 1, "Xi_A": 2, "Xi_B": 3, "Theta": 6, "b": 1}
    total = sum(counts.values())
    assert total == len(BLOCK_FAMILIES) + 8  # 14 slots for (5, 2)


def test_block_spectrum_missing_family_raises():
    with pytest.raises(ValueError):
        block_spectrum(SphereParams(4, 1), 1.0, "Omega_A")


def test_block_low_eigenvalues_match_sign_scalars():
    """Each block's smallest eigenvalue is the matching D quantity; the
    Theta block bottoms out at zero on the branch (the rotation modes)."""
    params = SphereParams(4, 2)
    eta = 1.3
    d1, d2, d3 = d_quantities(params, eta)
    theta = block_spectrum(params, eta, "Theta")
    omega = block_spectrum(params, eta, "Omega_A")
    xi = block_spectrum(params, eta, "Xi_A")
    b = block_spectrum(params, eta, "b")
    a0 = moment(params, eta, 0)
    assert abs(theta.eigenvalues[0]) <= 1e-10 * a0
    assert omega.eigenvalues[0] == pytest.approx(d1, rel=1e-9)
    assert xi.eigenvalues[0] == pytest.approx(d2, rel=1e-9)
    assert b.eigenvalues[0] == pytest.approx(d3, rel=1e-9)


def test_block_bulk_is_a0():
    params = SphereParams(4, 1)
    eta = 2.0
    spec = block_spectrum(params, eta, "Theta", grid_size=32)
    a0 = moment(params, eta, 0)
    assert spec.eigenvalues[-1] == pytest.approx(a0, rel=1e-10)
    assert np.all(np.diff(spec.eigenvalues) >= -1e-12)


def test_block_grid_floor():
    with pytest.raises(ValueError):
        block_spectrum(SphereParams(4, 1), 1.0, "Theta", grid_size=4)


def test_eigenvector_profiles_reproduce_eigenvalues():
    """Rayleigh quotients of the returned profiles against the weighted
    forms recover the eigenvalues, tying the matrix to the functional."""
    params = SphereParams(4, 1)
    eta = 1.5
    spec = block_spectrum(params, eta, "Theta", grid_size=24)
    rule = spec.rule
    w, t = rule.weights, rule.sin2
    a0 = moment(params, eta, 0, spec_order(spec))
    u = np.sqrt(t * (1.0 - t))
    c = 2.0 / (params.k * params.complement) * spec.alpha
    for col in (0, 5, -1):
        a = spec.eigenvectors[:, col]
        quad = a0 * float(np.sum(w * np.exp(-eta * t) * a * a)) - c * float(np.sum(w * u * a)) ** 2
        norm = float(np.sum(w * np.exp(-eta * t) * a * a))
        assert quad / norm == pytest.approx(spec.eigenvalues[col], rel=1e-8, abs=1e-12)


def spec_order(spec):
    return spec.rule.order


def test_full_spectrum_kernel_dimension():
    # dim SO(n) - dim(SO(k) x SO(n-k)) = k (n - k) rotation modes.
    for n, k, eta in ((3, 1, 3.5), (4, 2, 2.0), (5, 2, -1.5)):
        report = full_spectrum(SphereParams(n, k), eta, grid_size=32)
        assert report.kernel_dim == k * (n - k)
        assert not report.ambiguous


def test_full_spectrum_gap_sign_tracks_stability():
    params = SphereParams(4, 1)
    star = find_eta_star(params).eta_star
    above = full_spectrum(params, star + 1.0, grid_size=32)
    below = full_spectrum(params, star - 1.0, grid_size=32)
    assert above.gap > 0
    assert below.gap < 0
    assert above.kernel_projection >= 1.0 - 1e-6


def test_full_spectrum_pools_multiplicities():
    params = SphereParams(4, 1)
    report = full_spectrum(params, 2.0, grid_size=16)
    expected = sum(
        count * (16 - (1 if fam == "b" else 0))
        for fam, count in report.multiplicities.items()
        if count > 0
    )
    assert report.eigenvalues.size == expected
    assert np.all(np.diff(report.eigenvalues) >= 0)


def test_full_spectrum_isotropic_explicit_alpha():
    report = full_spectrum(SphereParams(4, 1), 0.0, grid_size=16, alpha=6.0)
    assert report.gap > 0  # below n(n+2)/2 = 12
    report2 = full_spectrum(SphereParams(4, 1), 0.0, grid_size=16, alpha=20.0)
    assert report2.eigenvalues[0] < 0


def test_gap_estimate_positive_above_fold():
    params = SphereParams(3, 1)
    star = find_eta_star(params).eta_star
    c0 = gap_estimate(params, star + 1.0)
    assert c0 > 0
    # Deterministic.
    assert gap_estimate(params, star + 1.0) == c0


def test_gap_estimate_shrinks_toward_fold():
    params = SphereParams(3, 1)
    star = find_eta_star(params).eta_star
    near = gap_estimate(params, star + 0.05)
    far = gap_estimate(params, star + 2.0)
    assert 0 < near < far


def test_gap_estimate_preconditions():
    params = SphereParams(3, 1)
    star = find_eta_star(params).eta_star
    with pytest.raises(ValueError):
        gap_estimate(SphereParams(4, 2), 3.0)
    with pytest.raises(ValueError):
        gap_estimate(params, star - 0.5)


@pytest.mark.parametrize("n", [3, 4])
def test_isotropic_threshold(n):
    got = isotropic_threshold(n, tol=1e-8)
    assert got == pytest.approx(n * (n + 2) / 2.0, abs=1e-6)
