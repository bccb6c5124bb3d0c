"""Direct solver behavior and backward error reporting."""
import numpy as np
import pytest
import scipy.sparse as sp

from plasmafem import fem, mesh as M
from plasmafem.materials import build_coefficients, GOLD
from plasmafem.solve import (Factorization, SolveError, backward_error,
                             solve_system)


def _random_system(n, seed=0):
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=0.05, random_state=rng,
                  dtype=float).tocsr()
    A = A + 1j * sp.random(n, n, density=0.05, random_state=rng).tocsr()
    A = A + sp.eye(n) * (4.0 + 1j)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A.tocsr(), b


def test_backward_error_small_after_refinement():
    A, b = _random_system(400)
    x, report = Factorization(A).solve(b)
    assert report.backward_error <= 1e-14
    assert report.refinement_steps == 1
    assert backward_error(A, x, b) == report.backward_error


def test_backward_error_zero_system():
    A = sp.csr_matrix((3, 3), dtype=complex)
    assert backward_error(A, np.zeros(3), np.zeros(3)) == 0.0


def test_dimension_checks():
    A, b = _random_system(10)
    with pytest.raises(SolveError):
        Factorization(A).solve(b[:5])
    with pytest.raises(SolveError):
        Factorization(sp.csr_matrix(np.ones((3, 2))))


def test_singular_matrix_raises():
    A = sp.csr_matrix(np.diag([1.0, 0.0, 2.0]).astype(complex))
    with pytest.raises(SolveError):
        Factorization(A).solve(np.ones(3, dtype=complex))


def test_solve_assembled_scattering_system():
    msh = M.build_domain_mesh([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0),
                               (-1.0, 1.0)], 3.0, 2.0, 1.0)
    coef = build_coefficients(msh, GOLD, 0.8, 3.0)
    e_sp = fem.FemSpace(msh, 1, "hcurl")
    j_sp = fem.FemSpace(msh, 1, "hdiv",
                        np.nonzero(msh.region == M.METAL)[0])
    inc = fem.plane_wave((1.0, 0.0), (0.0, 1.0), coef.incident_wavenumber)
    system = fem.assemble_system(coef, e_sp, j_sp, k_source=inc)
    pair, report = solve_system(system)
    assert report.backward_error <= 1e-12
    assert report.n == e_sp.n_free + j_sp.n_free
    # constrained DOFs stay at zero after expansion
    assert np.all(pair.u_e[~e_sp.free] == 0)
    assert np.all(pair.u_j[~j_sp.free] == 0)
    assert np.abs(pair.u_e).max() > 0
