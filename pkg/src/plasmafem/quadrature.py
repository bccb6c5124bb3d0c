"""Gauss quadrature on the reference triangle and on segments.

Triangle rules come from a Duffy-collapsed tensor Gauss-Legendre grid,
which is simple to generate at any order. ``triangle_rule(d)`` is exact
for polynomials of total degree d (with margin).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

#: Reference triangle vertices (0,0), (1,0), (0,1).
REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def segment_rule(degree: int):
    """Points s in [-1, 1] and weights with sum 2, exact to ``degree``."""
    n = degree // 2 + 1
    return gauss_legendre(n)


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Quadrature on the unit triangle, exact for total degree ``degree``.

    Returns (points (nq, 2), weights (nq,)) with weights summing to 1/2.
    """
    # Duffy map x = u(1-v), y = v adds one to the v-degree; +1 for margin.
    n = (degree + 2) // 2 + 1
    xu, wu = gauss_legendre(n)
    xv, wv = gauss_legendre(n)
    u = (xu + 1.0) / 2.0
    v = (xv + 1.0) / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wu / 2.0, wv / 2.0, indexing="ij")
    pts = np.stack([(U * (1.0 - V)).ravel(), V.ravel()], axis=1)
    wts = (WU * WV * (1.0 - V)).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def map_to_triangles(verts: np.ndarray, ref_pts: np.ndarray):
    """Map reference quadrature points to physical triangles.

    verts: (ne, 3, 2); returns points (ne, nq, 2) and |det J| (ne,).
    """
    a = verts[:, 0]
    e1 = verts[:, 1] - a
    e2 = verts[:, 2] - a
    pts = (a[:, None, :]
           + ref_pts[None, :, 0:1] * e1[:, None, :]
           + ref_pts[None, :, 1:2] * e2[:, None, :])
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return pts, det
