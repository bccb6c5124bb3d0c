import numpy as np
import pytest

from plasmafem import materials as mat
from plasmafem.mesh import build_domain_mesh, METAL, PML, VACUUM


def test_metal_parameter_table():
    assert mat.GOLD.omega_p == 1.390e16
    assert mat.GOLD.gamma == 3.230e13
    assert mat.GOLD.v_f == 1.084e6
    assert mat.SILVER.omega_p == 1.339e16
    assert mat.SILVER.gamma == 1.143e14
    assert mat.SILVER.v_f == 1.465e6
    # damping ratio, frozen from the parameter table
    assert abs(mat.GOLD.gamma_rel - 2.3237e-3) < 1e-7
    assert abs(mat.SILVER.gamma_rel - 8.5363e-3) < 1e-7


def test_si_coefficients():
    # zeta = (3/5) v_f^2 / (omega_p^2 eps0), independent recomputation
    z = 0.6 * (1.465e6) ** 2 / ((1.339e16) ** 2 * 8.8541878128e-12)
    assert abs(mat.SILVER.zeta_si - z) < 1e-6 * z
    a = mat.GOLD.alpha_si(1.0e16)
    expected = (1.0 - 3.230e13 / (1j * 1.0e16)) / \
        ((1.390e16) ** 2 * 8.8541878128e-12)
    assert abs(a - expected) < 1e-12 * abs(expected)


def test_scaled_coefficients():
    # kappa0 = c0 / (omega_p * 1 nm); frozen reference values
    assert abs(mat.GOLD.kappa0 - 21.567802733812948) < 1e-9
    assert abs(mat.SILVER.kappa0 - 22.38927991038088) < 1e-9
    assert abs(mat.GOLD.zeta_scaled - 0.0036490533616272444) < 1e-15
    a = mat.GOLD.alpha_scaled(0.8)
    assert abs(a - (1.0 - mat.GOLD.gamma_rel / 0.8j)) < 1e-15
    assert a.imag > 0  # damping enters with positive imaginary part


def test_spectral_norm_closed_form():
    assert mat.spectral_norm_2x2(np.diag([2.0, -3.0])) == pytest.approx(3.0)
    d = 1.0 - 0.75j
    m = np.diag([1.0 / d, d]).astype(complex)
    assert mat.spectral_norm_2x2(m) == pytest.approx(1.25)
    rng = np.random.default_rng(7)
    batch = rng.standard_normal((20, 2, 2)) + 1j * rng.standard_normal((20, 2, 2))
    got = mat.spectral_norm_2x2(batch)
    ref = np.array([np.linalg.svd(b, compute_uv=False)[0] for b in batch])
    np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_spectral_norm_is_form_maximum():
    # sigma_max(A) = max over unit complex u of |A u|; the singular vector
    # attains it and random unit vectors never exceed it
    rng = np.random.default_rng(11)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    target = float(mat.spectral_norm_2x2(a))
    _, s, vh = np.linalg.svd(a)
    attained = float(np.linalg.norm(a @ np.conj(vh[0])))
    assert attained == pytest.approx(target, rel=1e-12)
    for _ in range(200):
        u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        u /= np.linalg.norm(u)
        assert np.linalg.norm(a @ u) <= target + 1e-12


@pytest.fixture(scope="module")
def coef():
    m = build_domain_mesh([(-1, -1), (1, -1), (1, 1), (-1, 1)],
                          L=6, ell=4, h0=2.0)
    return mat.build_coefficients(m, mat.GOLD, omega=0.8, L=6.0)


def test_coefficients_inner_box(coef):
    m = coef.mesh
    inner = m.region != PML
    k0sq = mat.GOLD.kappa0 ** 2
    assert np.allclose(coef.eps[inner], np.eye(2))
    assert np.allclose(coef.chi[inner], k0sq)
    assert np.allclose(coef.eps_star[inner], 1.0)
    assert np.allclose(coef.chi_star[inner], k0sq)


def test_coefficients_stretched_frame(coef):
    m = coef.mesh
    d = 1.0 - 0.75j
    k0sq = mat.GOLD.kappa0 ** 2
    cen = m.centroids
    edge_x = (np.abs(cen[:, 0]) > 6) & (np.abs(cen[:, 1]) < 6)
    corner = (np.abs(cen[:, 0]) > 6) & (np.abs(cen[:, 1]) > 6)
    assert edge_x.any() and corner.any()
    k = np.nonzero(edge_x)[0][0]
    assert np.allclose(coef.eps[k], np.diag([1.0 / d, d]))
    assert abs(coef.chi[k] - k0sq / d) < 1e-9
    assert abs(coef.eps_star[k] - 1.25) < 1e-12
    k = np.nonzero(corner)[0][0]
    assert np.allclose(coef.eps[k], np.eye(2))  # d1 = d2 cancels
    assert abs(coef.chi[k] - k0sq / d**2) < 1e-9
    assert abs(coef.chi_star[k] - k0sq / abs(d) ** 2) < 1e-9


def test_wavespeeds(coef):
    m = coef.mesh
    vac = m.region == VACUUM
    # vacuum electric speed is kappa0, so the incident wavenumber is
    # omega / kappa0
    assert np.allclose(coef.speed_e[vac], mat.GOLD.kappa0)
    assert abs(coef.incident_wavenumber - 0.8 / mat.GOLD.kappa0) < 1e-15
    # plasmonic wavenumber 1/sqrt(zeta* eps*); frozen oracle for gold
    met = m.region == METAL
    assert np.allclose(coef.k_p[met], 1.0 / np.sqrt(mat.GOLD.zeta_scaled))
    assert abs(coef.k_p[met][0] - 16.5546) < 1e-3
    assert coef.speed_j == pytest.approx(
        np.sqrt(mat.GOLD.zeta_scaled / abs(mat.GOLD.alpha_scaled(0.8))))


def test_omega_validation():
    m = build_domain_mesh([(-1, -1), (1, -1), (1, 1), (-1, 1)],
                          L=6, ell=0, h0=2.0)
    with pytest.raises(ValueError):
        mat.build_coefficients(m, mat.GOLD, omega=0.0, L=6.0)
