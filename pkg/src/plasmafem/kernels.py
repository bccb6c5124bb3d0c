"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The active path is chosen at import time from the ``PLASMAFEM_NUMBA``
environment variable: "1" forces numba (error if unavailable), "0" forces
numpy, anything else (or unset) auto-selects numba when importable.
``benchmarks/kernel_bench.py`` compares the two paths.
"""
from __future__ import annotations

import os

import numpy as np

_mode = os.environ.get("PLASMAFEM_NUMBA", "auto").lower()
if _mode == "0":
    _HAVE_NUMBA = False
else:
    try:
        import numba
        from numba import njit, prange

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        if _mode == "1":
            raise
        _HAVE_NUMBA = False

USING_NUMBA = _HAVE_NUMBA


# ---------------------------------------------------------------------------
# numpy reference implementations

def eval_terms_numpy(points: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """Monomial term values x^i y^j at points (n, 2) -> (n, nterms)."""
    return points[:, 0:1] ** exps[:, 0] * points[:, 1:2] ** exps[:, 1]


def weighted_inner_numpy(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Batched weighted inner products sum_q w[e,q] a[e,i,q,...] b[e,j,q,...].

    a, b: (ne, n, nq) or (ne, n, nq, 2); w: (ne, nq). Returns (ne, n, n).
    Contracts the trailing component axis when present.
    """
    if a.ndim == 4:
        aw = a * w[:, None, :, None]
        return np.einsum("eiqc,ejqc->eij", aw, b, optimize=True)
    aw = a * w[:, None, :]
    return np.einsum("eiq,ejq->eij", aw, b, optimize=True)


def apply_tensor_numpy(tensor: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Apply per-element 2x2 tensors to field values (ne, n, nq, 2)."""
    return np.einsum("eab,ejqb->ejqa", tensor, vals, optimize=True)


# ---------------------------------------------------------------------------
# numba fast paths

if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _eval_terms_numba(points, exps):
        n = points.shape[0]
        m = exps.shape[0]
        out = np.empty((n, m))
        for q in prange(n):
            x = points[q, 0]
            y = points[q, 1]
            for k in range(m):
                v = 1.0
                for _ in range(exps[k, 0]):
                    v *= x
                for _ in range(exps[k, 1]):
                    v *= y
                out[q, k] = v
        return out

    @njit(cache=True, parallel=True)
    def _weighted_inner_vec_numba(a, b, w):
        ne, ni, nq, nc = a.shape
        nj = b.shape[1]
        out = np.zeros((ne, ni, nj), dtype=a.dtype)
        for e in prange(ne):
            for i in range(ni):
                for j in range(nj):
                    s = 0.0 * a[0, 0, 0, 0]
                    for q in range(nq):
                        for c in range(nc):
                            s += w[e, q] * a[e, i, q, c] * b[e, j, q, c]
                    out[e, i, j] = s
        return out

    @njit(cache=True, parallel=True)
    def _weighted_inner_scal_numba(a, b, w):
        ne, ni, nq = a.shape
        nj = b.shape[1]
        out = np.zeros((ne, ni, nj), dtype=a.dtype)
        for e in prange(ne):
            for i in range(ni):
                for j in range(nj):
                    s = 0.0 * a[0, 0, 0]
                    for q in range(nq):
                        s += w[e, q] * a[e, i, q] * b[e, j, q]
                    out[e, i, j] = s
        return out

    @njit(cache=True, parallel=True)
    def _apply_tensor_numba(tensor, vals):
        ne, n, nq, _ = vals.shape
        out = np.empty_like(vals)
        for e in prange(ne):
            t00 = tensor[e, 0, 0]
            t01 = tensor[e, 0, 1]
            t10 = tensor[e, 1, 0]
            t11 = tensor[e, 1, 1]
            for j in range(n):
                for q in range(nq):
                    v0 = vals[e, j, q, 0]
                    v1 = vals[e, j, q, 1]
                    out[e, j, q, 0] = t00 * v0 + t01 * v1
                    out[e, j, q, 1] = t10 * v0 + t11 * v1
        return out

    def eval_terms(points, exps):
        return _eval_terms_numba(np.ascontiguousarray(points, dtype=np.float64),
                                 np.ascontiguousarray(exps))

    def weighted_inner(a, b, w):
        dt = np.result_type(a.dtype, b.dtype, w.dtype)
        a = np.ascontiguousarray(a, dtype=dt)
        b = np.ascontiguousarray(b, dtype=dt)
        w = np.ascontiguousarray(w, dtype=dt)
        if a.ndim == 4:
            return _weighted_inner_vec_numba(a, b, w)
        return _weighted_inner_scal_numba(a, b, w)

    def apply_tensor(tensor, vals):
        dt = np.result_type(tensor.dtype, vals.dtype)
        return _apply_tensor_numba(np.ascontiguousarray(tensor, dtype=dt),
                                   np.ascontiguousarray(vals, dtype=dt))

else:
    eval_terms = eval_terms_numpy
    weighted_inner = weighted_inner_numpy
    apply_tensor = apply_tensor_numpy
