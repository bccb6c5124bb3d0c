"""Bivariate polynomial utilities on a monomial term table.

Polynomials are stored as coefficient arrays over the term table
``exponents(d)``; vector fields carry an extra leading axis of size 2.
All calculus (derivatives, planar curl/div) is exact coefficient algebra.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .kernels import eval_terms


@lru_cache(maxsize=None)
def exponents(degree: int) -> np.ndarray:
    """Exponent table [(i, j)] for monomials x^i y^j with i+j <= degree,
    ordered by total degree, then by i."""
    out = [(i, k - i) for k in range(degree + 1) for i in range(k + 1)]
    arr = np.array(out, dtype=np.int64).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


def n_terms(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def _term_index(degree: int) -> dict:
    return {(int(i), int(j)): k for k, (i, j) in enumerate(exponents(degree))}


@lru_cache(maxsize=None)
def diff_matrix(degree: int, axis: int) -> np.ndarray:
    """Matrix D with (D c) the coefficients of d/dx (axis=0) or d/dy (axis=1)
    of the polynomial with coefficients c; maps degree -> degree-1 tables."""
    src = exponents(degree)
    dst_idx = _term_index(max(degree - 1, 0))
    D = np.zeros((n_terms(max(degree - 1, 0)), n_terms(degree)))
    for k, (i, j) in enumerate(src):
        e = [int(i), int(j)]
        if e[axis] == 0:
            continue
        fac = e[axis]
        e[axis] -= 1
        D[dst_idx[(e[0], e[1])], k] = fac
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def embed_matrix(d_from: int, d_to: int) -> np.ndarray:
    """Inclusion of the degree-d_from table into the degree-d_to table."""
    if d_to < d_from:
        raise ValueError("cannot embed into a smaller table")
    idx = _term_index(d_to)
    E = np.zeros((n_terms(d_to), n_terms(d_from)))
    for k, (i, j) in enumerate(exponents(d_from)):
        E[idx[(int(i), int(j))], k] = 1.0
    E.setflags(write=False)
    return E


@lru_cache(maxsize=None)
def shift_matrix(degree: int, axis: int) -> np.ndarray:
    """Multiplication by x (axis=0) or y (axis=1): degree -> degree+1 tables."""
    idx = _term_index(degree + 1)
    M = np.zeros((n_terms(degree + 1), n_terms(degree)))
    for k, (i, j) in enumerate(exponents(degree)):
        e = [int(i), int(j)]
        e[axis] += 1
        M[idx[(e[0], e[1])], k] = 1.0
    M.setflags(write=False)
    return M


def eval_poly(coeffs: np.ndarray, points: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate polynomial(s) at ``points`` (..., 2).

    ``coeffs`` has shape (..., n_terms(degree)); broadcasting applies over
    the leading axes. Returns shape (..., npts).
    """
    T = eval_terms(points.reshape(-1, 2), exponents(degree))  # (npts, nt)
    return coeffs @ T.T


def div_coeffs(field: np.ndarray, degree: int) -> np.ndarray:
    """Planar divergence of a vector field (..., 2, nt) -> (..., nt')."""
    Dx = diff_matrix(degree, 0)
    Dy = diff_matrix(degree, 1)
    return field[..., 0, :] @ Dx.T + field[..., 1, :] @ Dy.T


def curl_coeffs(field: np.ndarray, degree: int) -> np.ndarray:
    """Planar scalar curl d1 f2 - d2 f1 of (..., 2, nt) -> (..., nt')."""
    Dx = diff_matrix(degree, 0)
    Dy = diff_matrix(degree, 1)
    return field[..., 1, :] @ Dx.T - field[..., 0, :] @ Dy.T


def vector_curl_coeffs(scalar: np.ndarray, degree: int) -> np.ndarray:
    """Planar vector curl (d2 s, -d1 s) of (..., nt) -> (..., 2, nt')."""
    Dx = diff_matrix(degree, 0)
    Dy = diff_matrix(degree, 1)
    return np.stack([scalar @ Dy.T, -(scalar @ Dx.T)], axis=-2)


def grad_coeffs(scalar: np.ndarray, degree: int) -> np.ndarray:
    """Gradient (d1 s, d2 s) of (..., nt) -> (..., 2, nt')."""
    Dx = diff_matrix(degree, 0)
    Dy = diff_matrix(degree, 1)
    return np.stack([scalar @ Dx.T, scalar @ Dy.T], axis=-2)


@lru_cache(maxsize=None)
def rt_generators(p: int) -> np.ndarray:
    """Spanning set of the order-p Raviart-Thomas space on a triangle.

    [P_p]^2 plus x * (homogeneous degree-p scalars); returns an array of
    shape (N, 2, n_terms(p+1)) with N = (p+1)(p+3).
    """
    nt = n_terms(p + 1)
    fields = []
    for k in range(n_terms(p)):
        f = np.zeros((2, nt))
        f[0, k] = 1.0
        fields.append(f)
        f = np.zeros((2, nt))
        f[1, k] = 1.0
        fields.append(f)
    idx = _term_index(p + 1)
    for i in range(p + 1):
        j = p - i
        f = np.zeros((2, nt))
        f[0, idx[(i + 1, j)]] = 1.0
        f[1, idx[(i, j + 1)]] = 1.0
        fields.append(f)
    G = np.array(fields)
    assert G.shape[0] == (p + 1) * (p + 3)
    G.setflags(write=False)
    return G


def rotate_field(field: np.ndarray) -> np.ndarray:
    """90-degree rotation (f1, f2) -> (-f2, f1) of (..., 2, nt) coefficients."""
    return np.stack([-field[..., 1, :], field[..., 0, :]], axis=-2)
