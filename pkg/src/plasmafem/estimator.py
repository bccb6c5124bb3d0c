"""Residual a posteriori error estimator for the coupled system.

Four per-element contributions, each a volume residual plus the eligible
edge jumps of that element (every interior edge contributes fully to both
incident elements, weighted with each element's own size and coefficient
bound):

  cc   : Maxwell residual and the jump of the rotational flux chi curl E_h.
  gd   : current residual and the jump of the compressional flux
         zeta div J_h (metal elements, interior metal edges).
  div  : charge-conservation residual div(i w eps E_h + J_h - J_e) and the
         normal jump of eps E_h (all interior edges, including the metal
         interface where the permittivity is discontinuous in effect).
  curl : field-consistency residual curl(i w alpha J_h - E_h - K_e) and
         the tangential jump of alpha J_h (metal elements).

The element indicator is the plain sum of its four contributions; the
global estimate is the root-sum-square of element indicators. Sources may
carry analytic ``div`` / ``curl`` attributes; plane waves do.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import poly
from .kernels import eval_terms
from .fem import SolutionPair, _chunks
from .materials import Coefficients
from .mesh import METAL
from .quadrature import gauss_legendre, triangle_rule, map_to_triangles


@dataclass
class ErrorIndicators:
    """Per-element estimator contributions on one mesh."""

    eta_cc: np.ndarray
    eta_gd: np.ndarray
    eta_div: np.ndarray
    eta_curl: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        return self.eta_cc + self.eta_gd + self.eta_div + self.eta_curl

    @property
    def total(self) -> float:
        return float(np.sqrt(np.sum(self.eta**2)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["element", "eta", "eta_cc", "eta_gd", "eta_div",
                        "eta_curl"])
            for k in range(len(self.eta_cc)):
                w.writerow([k, repr(float(self.eta[k])),
                            repr(float(self.eta_cc[k])),
                            repr(float(self.eta_gd[k])),
                            repr(float(self.eta_div[k])),
                            repr(float(self.eta_curl[k]))])


def _source_derivative(source, name):
    if source is None:
        return None
    fn = getattr(source, name, None)
    if fn is None:
        raise ValueError(
            f"source must provide an analytic .{name} attribute for the "
            "estimator; wrap the callable or use plane_wave")
    return fn


def _solution_tables(coef: Coefficients, pair: SolutionPair):
    """Local monomial tables of the discrete fields and their first and
    second derivatives, physical scaling included, for every element."""
    mesh = coef.mesh
    p = pair.e_space.p
    nt = mesh.n_triangles
    h = mesh.diameters
    CE = np.zeros((nt, 2, poly.n_terms(p + 1)), dtype=complex)
    curlE = np.zeros((nt, poly.n_terms(p)), dtype=complex)
    for pos in _chunks(pair.e_space.n_elems):
        g = pair.e_space.elems[pos]
        C, D = pair.e_local(pos)
        CE[g], curlE[g] = C, D
    # curl of (chi curl E): vector curl of the scalar, extra 1/h per grade
    curlcurlE = poly.vector_curl_coeffs(curlE, p) / h[:, None, None]

    ntm = pair.j_space.n_elems
    gm = pair.j_space.elems
    CJ = np.zeros((ntm, 2, poly.n_terms(p + 1)), dtype=complex)
    divJ = np.zeros((ntm, poly.n_terms(p)), dtype=complex)
    for pos in _chunks(ntm):
        C, D = pair.j_local(pos)
        CJ[pos], divJ[pos] = C, D
    hm = h[gm]
    graddivJ = poly.grad_coeffs(divJ, p) / hm[:, None, None]
    curlJ = poly.curl_coeffs(CJ, p + 1) / hm[:, None]
    return CE, curlE, curlcurlE, CJ, divJ, graddivJ, curlJ


def _eval_scalar(tab, u, degree):
    tp = eval_terms(u.reshape(-1, 2), poly.exponents(degree))
    return np.einsum("et,eqt->eq", tab, tp.reshape(u.shape[0], u.shape[1], -1))


def _eval_vector(tab, u, degree):
    tp = eval_terms(u.reshape(-1, 2), poly.exponents(degree))
    return np.einsum("ect,eqt->eqc", tab,
                     tp.reshape(u.shape[0], u.shape[1], -1))


def estimate(coef: Coefficients, pair: SolutionPair, j_source=None,
             k_source=None, quad_bump: int = 0) -> ErrorIndicators:
    """Evaluate the four estimator contributions for a discrete pair."""
    mesh = coef.mesh
    omega = coef.omega
    p = pair.e_space.p
    h = mesh.diameters
    nt = mesh.n_triangles
    metal = pair.j_space.elems
    jpos = pair.j_space.pos_of_global

    CE, curlE, curlcurlE, CJ, divJ, graddivJ, curlJ = \
        _solution_tables(coef, pair)

    div_j_source = _source_derivative(j_source, "div")
    curl_k_source = _source_derivative(k_source, "curl")

    # -- volume residuals ----------------------------------------------------
    qdeg = 2 * (p + 1) + (4 if (j_source or k_source) else 0) + quad_bump
    tq, tw = triangle_rule(qdeg)
    r_cc = np.zeros(nt)
    r_div = np.zeros(nt)
    r_gd = np.zeros(nt)
    r_curl = np.zeros(nt)
    cent = mesh.centroids

    for pos in _chunks(nt):
        pts, detj = map_to_triangles(mesh.tri_coords[pos], tq)
        u = (pts - cent[pos, None, :]) / h[pos, None, None]
        w = tw[None, :] * detj[:, None]
        ev = _eval_vector(CE[pos], u, p + 1)
        ccv = _eval_vector(curlcurlE[pos], u, max(p - 1, 0))
        eps_e = np.einsum("eab,eqb->eqa", coef.eps[pos], ev)
        res = -omega**2 * eps_e + coef.chi[pos][:, None, None] * ccv
        m = mesh.region[pos] == METAL
        if np.any(m):
            jv = _eval_vector(CJ[jpos[pos[m]]], u[m], p + 1)
            res[m] += 1j * omega * jv
        if j_source is not None:
            res -= 1j * omega * np.asarray(j_source(pts.reshape(-1, 2))
                                           ).reshape(res.shape)
        r_cc[pos] = np.sqrt(np.einsum("eqc,eq->e", np.abs(res)**2, w))

        dev = _eval_scalar(poly.div_coeffs(
            np.einsum("eab,ebt->eat", coef.eps[pos], CE[pos]), p + 1),
            u, p) / h[pos, None]
        rd = 1j * omega * dev
        if np.any(m):
            rd[m] += _eval_scalar(divJ[jpos[pos[m]]], u[m], p)
        if div_j_source is not None:
            rd -= np.asarray(div_j_source(pts.reshape(-1, 2))).reshape(rd.shape)
        r_div[pos] = np.sqrt(np.einsum("eq,eq->e", np.abs(rd)**2, w))

    for pos_m in _chunks(len(metal)):
        g = metal[pos_m]
        pts, detj = map_to_triangles(mesh.tri_coords[g], tq)
        u = (pts - cent[g, None, :]) / h[g, None, None]
        w = tw[None, :] * detj[:, None]
        jv = _eval_vector(CJ[pos_m], u, p + 1)
        gdv = _eval_vector(graddivJ[pos_m], u, max(p - 1, 0))
        ev = _eval_vector(CE[g], u, p + 1)
        res = -omega**2 * coef.alpha * jv - coef.zeta * gdv - 1j * omega * ev
        if k_source is not None:
            res -= 1j * omega * np.asarray(k_source(pts.reshape(-1, 2))
                                           ).reshape(res.shape)
        r_gd[g] = np.sqrt(np.einsum("eqc,eq->e", np.abs(res)**2, w))

        cj = _eval_scalar(curlJ[pos_m], u, p)
        ce = _eval_scalar(curlE[g], u, p)
        rc = 1j * omega * coef.alpha * cj - ce
        if k_source is not None:
            rc -= np.asarray(curl_k_source(pts.reshape(-1, 2))).reshape(rc.shape)
        r_curl[g] = np.sqrt(np.einsum("eq,eq->e", np.abs(rc)**2, w))

    # -- edge jumps ------------------------------------------------------------
    sq, sw = gauss_legendre(p + 2 + (quad_bump + 1) // 2)
    edges, edge_tris = mesh.edges, mesh.edge_tris
    ne = edges.shape[0]
    interior = ~mesh.boundary_edges
    imet = mesh.interior_metal_edges
    lo = mesh.vertices[edges[:, 0]]
    hi = mesh.vertices[edges[:, 1]]
    elen = mesh.edge_lengths
    nrm = mesh.edge_normals

    jump_cc = np.zeros(ne)
    jump_div = np.zeros(ne)
    jump_gd = np.zeros(ne)
    jump_curl = np.zeros(ne)

    ie = np.nonzero(interior)[0]
    pts = 0.5 * (lo[ie] + hi[ie])[:, None, :] + \
        0.5 * (hi[ie] - lo[ie])[:, None, :] * sq[None, :, None]

    def side_u(tids):
        return (pts - cent[tids, None, :]) / h[tids, None, None]

    t0, t1 = edge_tris[ie, 0], edge_tris[ie, 1]
    u0, u1 = side_u(t0), side_u(t1)
    # scalar flux chi curl E
    s0 = coef.chi[t0][:, None] * _eval_scalar(curlE[t0], u0, p)
    s1 = coef.chi[t1][:, None] * _eval_scalar(curlE[t1], u1, p)
    jump_cc[ie] = 0.5 * elen[ie] * np.einsum("eq,q->e", np.abs(s0 - s1)**2, sw)
    # normal flux of eps E
    v0 = np.einsum("eab,eqb->eqa", coef.eps[t0], _eval_vector(CE[t0], u0, p + 1))
    v1 = np.einsum("eab,eqb->eqa", coef.eps[t1], _eval_vector(CE[t1], u1, p + 1))
    dn = np.einsum("eqc,ec->eq", v0 - v1, nrm[ie])
    jump_div[ie] = 0.5 * elen[ie] * np.einsum("eq,q->e", np.abs(dn)**2, sw)

    im = np.nonzero(imet)[0]
    if len(im):
        pts_m = 0.5 * (lo[im] + hi[im])[:, None, :] + \
            0.5 * (hi[im] - lo[im])[:, None, :] * sq[None, :, None]
        t0, t1 = edge_tris[im, 0], edge_tris[im, 1]
        u0 = (pts_m - cent[t0, None, :]) / h[t0, None, None]
        u1 = (pts_m - cent[t1, None, :]) / h[t1, None, None]
        d0 = _eval_scalar(divJ[jpos[t0]], u0, p)
        d1 = _eval_scalar(divJ[jpos[t1]], u1, p)
        jump_gd[im] = 0.5 * elen[im] * coef.zeta**2 * \
            np.einsum("eq,q->e", np.abs(d0 - d1)**2, sw)
        jv0 = _eval_vector(CJ[jpos[t0]], u0, p + 1)
        jv1 = _eval_vector(CJ[jpos[t1]], u1, p + 1)
        tang = np.stack([-nrm[im, 1], nrm[im, 0]], axis=1)
        dt = np.einsum("eqc,ec->eq", jv0 - jv1, tang)
        jump_curl[im] = 0.5 * elen[im] * abs(coef.alpha)**2 * \
            np.einsum("eq,q->e", np.abs(dt)**2, sw)

    # -- per-element aggregation ------------------------------------------------
    e_cc = np.zeros(nt)
    e_div = np.zeros(nt)
    e_gd = np.zeros(nt)
    e_curl = np.zeros(nt)
    for m in range(3):
        eid = mesh.tri_edges[:, m]
        e_cc += np.where(interior[eid], jump_cc[eid], 0.0)
        e_div += np.where(interior[eid], jump_div[eid], 0.0)
        e_gd += np.where(imet[eid], jump_gd[eid], 0.0)
        e_curl += np.where(imet[eid], jump_curl[eid], 0.0)

    sh = np.sqrt(h)
    eta_cc = (h * r_cc + sh * np.sqrt(e_cc)) / np.sqrt(coef.chi_star)
    eta_div = (h * r_div + omega * sh * np.sqrt(e_div)) / np.sqrt(coef.eps_star)
    eta_gd = (h * r_gd + sh * np.sqrt(e_gd)) / np.sqrt(coef.zeta_star)
    eta_curl = (h * r_curl + omega * sh * np.sqrt(e_curl)) / \
        np.sqrt(coef.alpha_star)
    ismetal = mesh.region == METAL
    eta_gd[~ismetal] = 0.0
    eta_curl[~ismetal] = 0.0
    return ErrorIndicators(eta_cc=eta_cc, eta_gd=eta_gd, eta_div=eta_div,
                           eta_curl=eta_curl)


# ---------------------------------------------------------------------------
# data oscillation


@dataclass
class Oscillation:
    osc: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sqrt(np.sum(self.osc**2)))


def _projection_residual_sq(mesh, pos, source, d_source, wavenum, degree,
                            d_op, qdeg):
    """Weighted best-approximation residual of a source by degree-``degree``
    vector polynomials per element.

    Solves, elementwise, (k^2 h^2)(pi, v) + h^2 (D pi, D v) = same with the
    source for all v in P_degree^2, D the div or curl, and returns the two
    squared seminorm gaps (k^2 h^2 |f - pi|^2, h^2 |D f - D pi|^2).
    """
    h = mesh.diameters[pos]
    ntm = poly.n_terms(degree)
    nb = 2 * ntm
    tq, tw = triangle_rule(qdeg)
    pts, detj = map_to_triangles(mesh.tri_coords[pos], tq)
    u = (pts - mesh.centroids[pos, None, :]) / h[:, None, None]
    nq = len(tw)
    tp = eval_terms(u.reshape(-1, 2), poly.exponents(degree)).reshape(
        len(pos), nq, ntm)
    w = tw[None, :] * detj[:, None]

    # basis fields: (monomial, 0) then (0, monomial)
    M = np.einsum("eqi,eqj,eq->eij", tp, tp, w)
    mass = np.zeros((len(pos), nb, nb))
    mass[:, :ntm, :ntm] = M
    mass[:, ntm:, ntm:] = M

    eye = np.eye(ntm)
    bx = np.concatenate([eye, np.zeros((ntm, ntm))], axis=0)  # (nb, ntm)
    by = np.concatenate([np.zeros((ntm, ntm)), eye], axis=0)
    if d_op == "div":
        dmat = bx @ poly.diff_matrix(degree, 0).T + \
            by @ poly.diff_matrix(degree, 1).T
    else:
        dmat = by @ poly.diff_matrix(degree, 0).T - \
            bx @ poly.diff_matrix(degree, 1).T
    tpd = eval_terms(u.reshape(-1, 2), poly.exponents(max(degree - 1, 0))
                     ).reshape(len(pos), nq, -1)
    dvals = np.einsum("it,eqt->eiq", dmat, tpd) / h[:, None, None]
    stiff = np.einsum("eiq,ejq,eq->eij", dvals, dvals, w)

    k2h2 = (wavenum[pos] * h) ** 2 if np.ndim(wavenum) else (wavenum * h) ** 2
    A = k2h2[:, None, None] * mass + (h**2)[:, None, None] * stiff

    fv = np.asarray(source(pts.reshape(-1, 2))).reshape(len(pos), nq, 2)
    dfv = np.asarray(d_source(pts.reshape(-1, 2))).reshape(len(pos), nq)
    rhs = k2h2[:, None] * np.concatenate([
        np.einsum("eqi,eq,eq->ei", tp, fv[..., 0], w),
        np.einsum("eqi,eq,eq->ei", tp, fv[..., 1], w)], axis=1)
    rhs = rhs + (h**2)[:, None] * np.einsum("eiq,eq,eq->ei", dvals, dfv, w)
    c = np.linalg.solve(A, rhs[..., None])[..., 0]

    pv = np.stack([np.einsum("ei,eqi->eq", c[:, :ntm], tp),
                   np.einsum("ei,eqi->eq", c[:, ntm:], tp)], axis=-1)
    dpv = np.einsum("ei,eiq->eq", c, dvals.astype(complex))
    gap0 = k2h2 * np.einsum("eqc,eq->e", np.abs(fv - pv)**2, w)
    gap1 = h**2 * np.einsum("eq,eq->e", np.abs(dfv - dpv)**2, w)
    return gap0, gap1


def oscillation(coef: Coefficients, degree: int, j_source=None,
                k_source=None, j_elems=None, quad_bump: int = 6) -> Oscillation:
    """Data oscillation of the sources against degree+1 polynomials.

    degree is the FE degree p; sources are measured against P_{p+1}
    projections in weighted norms matching the estimator scaling. The
    k_source part is restricted to the metal elements (j_elems, default
    all metal elements of the mesh).
    """
    mesh = coef.mesh
    nt = mesh.n_triangles
    out = np.zeros(nt)
    qdeg = 2 * (degree + 2) + quad_bump
    if j_source is not None:
        djs = _source_derivative(j_source, "div")
        for pos in _chunks(nt):
            g0, g1 = _projection_residual_sq(
                mesh, pos, j_source, djs, coef.k_e, degree + 1, "div", qdeg)
            out[pos] += (g0 + g1) / coef.eps_star[pos]
    if k_source is not None:
        cks = _source_derivative(k_source, "curl")
        if j_elems is None:
            j_elems = np.nonzero(mesh.region == METAL)[0]
        for pos in _chunks(len(j_elems)):
            g = j_elems[pos]
            g0, g1 = _projection_residual_sq(
                mesh, g, k_source, cks, coef.k_j, degree + 1, "curl", qdeg)
            out[g] += (g0 + g1) / coef.alpha_star
    return Oscillation(osc=np.sqrt(out))
