import numpy as np
import pytest

from plasmafem import poly


def test_exponents_table():
    e = poly.exponents(2)
    assert e.tolist() == [[0, 0], [0, 1], [1, 0], [0, 2], [1, 1], [2, 0]]
    assert poly.n_terms(3) == 10
    assert len(poly.exponents(5)) == poly.n_terms(5)


def test_diff_matrix_structure():
    # d/dx x^i y^j = i x^(i-1) y^j, checked entry by entry
    d = 4
    Dx = poly.diff_matrix(d, 0)
    src = poly.exponents(d)
    dst = {tuple(e): k for k, e in enumerate(poly.exponents(d - 1))}
    for k, (i, j) in enumerate(src):
        col = Dx[:, k]
        if i == 0:
            assert not col.any()
        else:
            assert col[dst[(i - 1, j)]] == i
            assert np.count_nonzero(col) == 1


def test_eval_poly_and_calculus():
    # f = (x^2 y, x y^2): div = 4xy, curl = y^2 - x^2
    d = 3
    idx = {tuple(e): k for k, e in enumerate(poly.exponents(d))}
    f = np.zeros((2, poly.n_terms(d)))
    f[0, idx[(2, 1)]] = 1.0
    f[1, idx[(1, 2)]] = 1.0
    pts = np.random.default_rng(3).uniform(-1, 1, (40, 2))
    x, y = pts[:, 0], pts[:, 1]
    div = poly.eval_poly(poly.div_coeffs(f, d), pts, d - 1)
    curl = poly.eval_poly(poly.curl_coeffs(f, d), pts, d - 1)
    np.testing.assert_allclose(div, 4 * x * y, atol=1e-13)
    np.testing.assert_allclose(curl, y**2 - x**2, atol=1e-13)

    # s = x^2 y: grad = (2xy, x^2), vector curl = (x^2, -2xy)
    s = np.zeros(poly.n_terms(d))
    s[idx[(2, 1)]] = 1.0
    g = poly.grad_coeffs(s, d)
    vc = poly.vector_curl_coeffs(s, d)
    np.testing.assert_allclose(poly.eval_poly(g[0], pts, d - 1), 2 * x * y,
                               atol=1e-13)
    np.testing.assert_allclose(poly.eval_poly(g[1], pts, d - 1), x**2,
                               atol=1e-13)
    np.testing.assert_allclose(poly.eval_poly(vc[0], pts, d - 1), x**2,
                               atol=1e-13)
    np.testing.assert_allclose(poly.eval_poly(vc[1], pts, d - 1), -2 * x * y,
                               atol=1e-13)


def test_shift_and_embed():
    rng = np.random.default_rng(0)
    d = 3
    c = rng.standard_normal(poly.n_terms(d))
    pts = rng.uniform(-1, 1, (25, 2))
    fx = poly.eval_poly(poly.shift_matrix(d, 0) @ c, pts, d + 1)
    np.testing.assert_allclose(fx, pts[:, 0] * poly.eval_poly(c, pts, d),
                               rtol=1e-13)
    emb = poly.eval_poly(poly.embed_matrix(d, d + 2) @ c, pts, d + 2)
    np.testing.assert_allclose(emb, poly.eval_poly(c, pts, d), rtol=1e-13)
    with pytest.raises(ValueError):
        poly.embed_matrix(3, 2)


@pytest.mark.parametrize("p", [0, 1, 2, 3, 4, 5])
def test_rt_generators(p):
    G = poly.rt_generators(p)
    assert G.shape == ((p + 1) * (p + 3), 2, poly.n_terms(p + 1))
    # divergence of every generator has degree <= p (RT property)
    dv = poly.div_coeffs(G, p + 1)
    top = [k for k, (i, j) in enumerate(poly.exponents(p)) if i + j == p]
    # the x*(homogeneous p) tail generators have nonzero divergence
    assert np.any(np.abs(dv[-(p + 1):][:, top]) > 0)
    # generators are linearly independent
    flat = G.reshape(G.shape[0], -1)
    assert np.linalg.matrix_rank(flat) == G.shape[0]


def test_rotate_field():
    rng = np.random.default_rng(1)
    f = rng.standard_normal((2, poly.n_terms(2)))
    r = poly.rotate_field(f)
    pts = rng.uniform(-1, 1, (10, 2))
    v = np.stack([poly.eval_poly(f[0], pts, 2), poly.eval_poly(f[1], pts, 2)],
                 axis=-1)
    w = np.stack([poly.eval_poly(r[0], pts, 2), poly.eval_poly(r[1], pts, 2)],
                 axis=-1)
    np.testing.assert_allclose(w[:, 0], -v[:, 1], rtol=1e-14)
    np.testing.assert_allclose(w[:, 1], v[:, 0], rtol=1e-14)
