"""Estimator correctness against an independently coded recomputation."""
import numpy as np
import pytest

from plasmafem import fem, mesh as M
from plasmafem.estimator import estimate, oscillation
from plasmafem.fem import SolutionPair
from plasmafem.materials import build_coefficients, GOLD
from plasmafem.solve import solve_system

from oracles import oracle_indicators

SQUARE = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]


@pytest.fixture(scope="module")
def setting():
    msh = M.build_domain_mesh(SQUARE, 2.0, 1.0, 1.2)
    coef = build_coefficients(msh, GOLD, 0.8, 2.0)
    return msh, coef


def _random_pair(msh, p, seed):
    rng = np.random.default_rng(seed)
    e_sp = fem.FemSpace(msh, p, "hcurl")
    j_sp = fem.FemSpace(msh, p, "hdiv", np.nonzero(msh.region == M.METAL)[0])
    u_e = rng.standard_normal(e_sp.n_dofs) + 1j * rng.standard_normal(e_sp.n_dofs)
    u_j = rng.standard_normal(j_sp.n_dofs) + 1j * rng.standard_normal(j_sp.n_dofs)
    return SolutionPair(e_sp, j_sp, u_e, u_j)


@pytest.mark.parametrize("p,seed", [(0, 1), (1, 2), (2, 3)])
def test_components_match_oracle(setting, p, seed):
    msh, coef = setting
    pair = _random_pair(msh, p, seed)
    got = estimate(coef, pair)
    ref_cc, ref_gd, ref_div, ref_curl = oracle_indicators(coef, pair)
    for a, b in [(got.eta_cc, ref_cc), (got.eta_gd, ref_gd),
                 (got.eta_div, ref_div), (got.eta_curl, ref_curl)]:
        np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8 * b.max())


def test_quad_bump_stability(setting):
    # with polynomial data the quadrature is already exact; raising the
    # order must not change the result
    msh, coef = setting
    pair = _random_pair(msh, 1, 7)
    a = estimate(coef, pair)
    b = estimate(coef, pair, quad_bump=4)
    np.testing.assert_allclose(a.eta, b.eta, rtol=1e-12, atol=1e-13)


def test_zero_solution_zero_estimate(setting):
    msh, coef = setting
    e_sp = fem.FemSpace(msh, 1, "hcurl")
    j_sp = fem.FemSpace(msh, 1, "hdiv", np.nonzero(msh.region == M.METAL)[0])
    pair = SolutionPair(e_sp, j_sp, np.zeros(e_sp.n_dofs, complex),
                        np.zeros(j_sp.n_dofs, complex))
    ind = estimate(coef, pair)
    assert ind.total == 0.0


def test_zero_data_zero_everything(setting):
    # no sources: the linear system has zero rhs, the solution is zero,
    # and the estimate vanishes
    msh, coef = setting
    e_sp = fem.FemSpace(msh, 1, "hcurl")
    j_sp = fem.FemSpace(msh, 1, "hdiv", np.nonzero(msh.region == M.METAL)[0])
    system = fem.assemble_system(coef, e_sp, j_sp)
    pair, report = solve_system(system)
    assert np.abs(pair.u_e).max() == 0.0
    assert np.abs(pair.u_j).max() == 0.0
    assert estimate(coef, pair).total == 0.0


def test_sources_enter_residuals(setting):
    msh, coef = setting
    pair = _random_pair(msh, 1, 11)
    inc = fem.plane_wave((1.0, 0.0), (0.0, 1.0), coef.incident_wavenumber)
    plain = estimate(coef, pair)
    with_src = estimate(coef, pair, k_source=inc)
    assert not np.allclose(plain.eta_gd, with_src.eta_gd)
    # the electric Maxwell residual does not see the k source
    np.testing.assert_allclose(plain.eta_cc, with_src.eta_cc)


def test_source_requires_analytic_derivative(setting):
    msh, coef = setting
    pair = _random_pair(msh, 0, 13)

    def bare(x):
        return np.zeros(np.shape(x))

    with pytest.raises(ValueError):
        estimate(coef, pair, j_source=bare)


def test_indicators_csv_roundtrip(setting, tmp_path):
    msh, coef = setting
    pair = _random_pair(msh, 0, 17)
    ind = estimate(coef, pair)
    path = tmp_path / "ind.csv"
    ind.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert len(rows) == msh.n_triangles + 1
    first = rows[1].split(",")
    assert float(first[1]) == ind.eta[0]


def test_oscillation_zero_for_polynomial_sources(setting):
    # a linear source is its own degree-(p+1) projection for p >= 0
    msh, coef = setting

    def lin(x):
        x = np.asarray(x, dtype=float)
        return np.stack([0.2 * x[..., 0] + 0.1, 0.3 * x[..., 1]], axis=-1)

    lin.div = lambda x: np.full(np.asarray(x).shape[:-1], 0.5, dtype=complex)
    lin.curl = lambda x: np.zeros(np.asarray(x).shape[:-1], dtype=complex)
    osc = oscillation(coef, 1, j_source=lin, k_source=lin)
    assert osc.total <= 1e-10
