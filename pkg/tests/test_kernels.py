import numpy as np
from hypothesis import given, settings, strategies as st

from plasmafem import kernels
from plasmafem.poly import exponents


def test_eval_terms_matches_reference():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, (500, 2))
    exps = exponents(6)
    got = kernels.eval_terms(pts, exps)
    ref = kernels.eval_terms_numpy(pts, exps)
    np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-13)
    # brute-force oracle
    brute = np.stack([pts[:, 0] ** i * pts[:, 1] ** j for i, j in exps],
                     axis=1)
    np.testing.assert_allclose(got, brute, rtol=1e-13, atol=1e-13)


def test_weighted_inner_matches_reference():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((7, 5, 9, 2)) + 1j * rng.standard_normal((7, 5, 9, 2))
    b = rng.standard_normal((7, 4, 9, 2))
    w = rng.standard_normal((7, 9)) + 1j * rng.standard_normal((7, 9))
    got = kernels.weighted_inner(a, b, w)
    ref = np.einsum("eiqc,ejqc,eq->eij", a, b, w)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_weighted_inner_scalar_axis():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 6, 11, 1))
    w = rng.standard_normal((3, 11))
    got = kernels.weighted_inner(a, a, w)
    ref = np.einsum("eiqc,ejqc,eq->eij", a, a, w)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_apply_tensor_matches_reference():
    rng = np.random.default_rng(3)
    t = rng.standard_normal((6, 2, 2)) + 1j * rng.standard_normal((6, 2, 2))
    v = rng.standard_normal((6, 4, 8, 2))
    got = kernels.apply_tensor(t, v)
    ref = np.einsum("eab,eiqb->eiqa", t, v)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 7),
       st.integers(0, 2**31 - 1))
def test_weighted_inner_symmetry(ne, ni, nq, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((ne, ni, nq, 2))
    w = rng.standard_normal((ne, nq))
    m = kernels.weighted_inner(a, a, w)
    np.testing.assert_allclose(m, np.swapaxes(m, 1, 2), atol=1e-12)
