"""Edge and face element spaces and assembly of the coupled system.

The electric field lives in a first-kind Nedelec space of degree p on the
whole mesh (zero tangential trace on the outer boundary); the hydrodynamic
current lives in a Raviart-Thomas space of the same degree on the metal
submesh (zero normal trace on the metal interface). In 2D the Nedelec space
is the 90-degree rotation of Raviart-Thomas, so both are built from one
construction and the curl of a rotated field is the divergence of the
underlying one.

Basis functions are constructed per element directly in physical
coordinates (local frame: centroid origin, diameter scale) against globally
defined degrees of freedom: Legendre moments of the normal trace along each
edge, parametrized from the lower to the higher vertex id, plus interior
moments. Shared edges then carry literally the same functionals from both
sides, making conformity automatic with no orientation bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import legval

from . import poly
from .kernels import eval_terms, weighted_inner, apply_tensor
from .mesh import Mesh2D, METAL
from .materials import Coefficients
from .quadrature import gauss_legendre, triangle_rule, map_to_triangles

DEFAULT_CHUNK = 2048


class FemError(Exception):
    pass


def _legendre_rows(order, s):
    """(order+1, len(s)) rows of Legendre polynomial values."""
    out = np.empty((order + 1, len(s)))
    for q in range(order + 1):
        c = np.zeros(q + 1)
        c[q] = 1.0
        out[q] = legval(s, c)
    return out


class FemSpace:
    """Vector-valued conforming space of degree p on a subset of elements.

    kind "hdiv": Raviart-Thomas, continuous normal trace.
    kind "hcurl": rotated Raviart-Thomas (2D Nedelec), continuous
    tangential trace. Values returned by evaluation routines are always the
    physical (rotated, for hcurl) fields.
    """

    def __init__(self, mesh: Mesh2D, degree: int, kind: str,
                 elems: np.ndarray | None = None):
        if kind not in ("hcurl", "hdiv"):
            raise FemError(f"unknown space kind {kind!r}")
        if degree < 0 or degree > 5:
            raise FemError("polynomial degree must be between 0 and 5")
        self.mesh = mesh
        self.p = int(degree)
        self.kind = kind
        if elems is None:
            elems = np.arange(mesh.n_triangles)
        self.elems = np.asarray(elems, dtype=np.int64)
        self.n_elems = len(self.elems)

        p = self.p
        self.n_edge_moments = p + 1
        self.n_local = (p + 1) * (p + 3)
        self.n_int_local = p * (p + 1)

        in_sub = np.zeros(mesh.n_triangles, dtype=bool)
        in_sub[self.elems] = True
        self.pos_of_global = np.full(mesh.n_triangles, -1, dtype=np.int64)
        self.pos_of_global[self.elems] = np.arange(self.n_elems)

        sub_tri_edges = mesh.tri_edges[self.elems]
        self.edge_ids = np.unique(sub_tri_edges)
        edge_pos = np.full(mesh.edges.shape[0], -1, dtype=np.int64)
        edge_pos[self.edge_ids] = np.arange(len(self.edge_ids))
        self.edge_pos = edge_pos

        ne = len(self.edge_ids)
        self.n_edge_dofs = ne * (p + 1)
        self.n_dofs = self.n_edge_dofs + self.n_elems * self.n_int_local

        dofs = np.empty((self.n_elems, self.n_local), dtype=np.int64)
        for m in range(3):
            base = edge_pos[sub_tri_edges[:, m]] * (p + 1)
            for q in range(p + 1):
                dofs[:, m * (p + 1) + q] = base + q
        int_base = self.n_edge_dofs + np.arange(self.n_elems) * self.n_int_local
        for k in range(self.n_int_local):
            dofs[:, 3 * (p + 1) + k] = int_base + k
        self.elem_dofs = dofs

        # homogeneous trace constraints on the space boundary
        et = mesh.edge_tris
        sub_count = in_sub[et[:, 0]].astype(int)
        sub_count += np.where(et[:, 1] >= 0, in_sub[np.maximum(et[:, 1], 0)], False)
        constrained_edges = (sub_count == 1) & (edge_pos >= 0)
        self.free = np.ones(self.n_dofs, dtype=bool)
        for eid in np.nonzero(constrained_edges)[0]:
            s = edge_pos[eid] * (p + 1)
            self.free[s:s + p + 1] = False
        self.n_free = int(self.free.sum())

        self._gen = poly.rt_generators(p)  # (N, 2, nT)
        self.n_terms = self._gen.shape[2]
        self._exps = poly.exponents(p + 1)
        self._coeff_cache = {}

    # -- geometry helpers ----------------------------------------------------

    def frames(self, pos):
        """Centroids and diameters of sub-elements at given positions."""
        g = self.elems[pos]
        return self.mesh.centroids[g], self.mesh.diameters[g]

    def to_local(self, pos, pts):
        """Map physical points (nc, nq, 2) to the local frames of the
        sub-elements at positions pos."""
        c, h = self.frames(pos)
        return (pts - c[:, None, :]) / h[:, None, None]

    # -- basis construction --------------------------------------------------

    def basis_coeffs(self, pos) -> np.ndarray:
        """(nc, N, 2, nT) monomial coefficients of the nodal basis of the
        underlying Raviart-Thomas fields, in local frame coordinates."""
        key = (int(pos[0]), int(pos[-1]), len(pos))
        hit = self._coeff_cache.get(key)
        if hit is not None and np.array_equal(hit[0], pos):
            return hit[1]
        B = self._build_basis(np.asarray(pos))
        if len(self._coeff_cache) > 4:
            self._coeff_cache.clear()
        self._coeff_cache[key] = (np.asarray(pos).copy(), B)
        return B

    def _build_basis(self, pos):
        mesh, p, G = self.mesh, self.p, self._gen
        nc, N = len(pos), self.n_local
        g_elems = self.elems[pos]
        verts = mesh.tri_coords[g_elems]  # (nc, 3, 2)
        c, h = self.frames(pos)
        V = np.empty((nc, N, N))

        # edge moments: (1/|e|) int (w . n) L_q along the global edge
        sq, sw = gauss_legendre(p + 2)
        L = _legendre_rows(p, sq)  # (p+1, nq)
        edges = mesh.edges
        for m in range(3):
            eid = mesh.tri_edges[g_elems, m]
            lo = mesh.vertices[edges[eid, 0]]
            hi = mesh.vertices[edges[eid, 1]]
            pts = 0.5 * (lo + hi)[:, None, :] + 0.5 * (hi - lo)[:, None, :] * sq[None, :, None]
            u = (pts - c[:, None, :]) / h[:, None, None]
            tp = eval_terms(u.reshape(-1, 2), self._exps).reshape(nc, len(sq), -1)
            gv = np.einsum("gct,eqt->egqc", G, tp)
            n = mesh.edge_normals[eid]  # (nc, 2)
            wn = np.einsum("egqc,ec->egq", gv, n)
            V[:, m * (p + 1):(m + 1) * (p + 1), :] = \
                0.5 * np.einsum("lq,q,egq->elg", L, sw, wn)

        # interior moments: (1/|K|) int w_c u^a v^b for a+b <= p-1
        if self.n_int_local:
            tq, tw = triangle_rule(2 * p + 2)
            pts, detj = map_to_triangles(verts, tq)
            u = (pts - c[:, None, :]) / h[:, None, None]
            tp = eval_terms(u.reshape(-1, 2), self._exps).reshape(nc, len(tw), -1)
            gv = np.einsum("gct,eqt->egqc", G, tp)
            mono = eval_terms(u.reshape(-1, 2), poly.exponents(p - 1))
            mono = mono.reshape(nc, len(tw), -1)
            area = 0.5 * detj
            mom = np.einsum("egqc,eqk,q->egck", gv, mono, tw) * \
                (detj / area)[:, None, None, None]
            # order: component 0 moments then component 1
            block = np.concatenate([mom[:, :, 0, :], mom[:, :, 1, :]], axis=2)
            V[:, 3 * (p + 1):, :] = np.swapaxes(block, 1, 2)

        X = np.linalg.inv(V)  # X[e, g, i]
        return np.einsum("egi,gct->eict", X, G)

    # -- solution / basis evaluation -----------------------------------------

    def eval_basis(self, pos, pts):
        """Physical basis values and first-order derived quantity at points.

        Returns (values (nc, N, nq, 2), dvalue (nc, N, nq)) where dvalue is
        div for hdiv and curl for hcurl. pts are physical, (nc, nq, 2).
        """
        B = self.basis_coeffs(pos)
        _, h = self.frames(pos)
        u = self.to_local(pos, pts)
        nc, nq = u.shape[:2]
        tp = eval_terms(u.reshape(-1, 2), self._exps).reshape(nc, nq, -1)
        vals = np.einsum("eict,eqt->eiqc", B, tp)
        Bd = poly.div_coeffs(B, self.p + 1)
        tpd = eval_terms(u.reshape(-1, 2), poly.exponents(self.p)).reshape(nc, nq, -1)
        dval = np.einsum("eit,eqt->eiq", Bd, tpd) / h[:, None, None]
        if self.kind == "hcurl":
            vals = np.stack([-vals[..., 1], vals[..., 0]], axis=-1)
        return vals, dval

    def solution_coeffs(self, u, pos):
        """Local monomial representation of a discrete field on elements.

        Returns (field (nc, 2, nT), dfield (nc, nTd)) in local frame
        coordinates; dfield is the physical div (hdiv) or curl (hcurl),
        including the 1/h frame factor. Field values for hcurl are rotated
        to physical orientation.
        """
        B = self.basis_coeffs(pos)
        _, h = self.frames(pos)
        ue = u[self.elem_dofs[pos]]  # (nc, N)
        C = np.einsum("ei,eict->ect", ue, B)
        D = np.einsum("ei,eit->et", ue, poly.div_coeffs(B, self.p + 1)) / h[:, None]
        if self.kind == "hcurl":
            C = np.stack([-C[:, 1], C[:, 0]], axis=1)
        return C, D

    def interpolation_check(self):
        """Max deviation of DOF(basis) from identity; conditioning probe."""
        worst = 0.0
        for start in range(0, self.n_elems, DEFAULT_CHUNK):
            pos = np.arange(start, min(start + DEFAULT_CHUNK, self.n_elems))
            B = self.basis_coeffs(pos)
            worst = max(worst, float(np.max(np.abs(B))))
        return worst


@dataclass
class System:
    """Assembled coupled system over the free DOFs.

    DOF layout: all electric DOFs first, then current DOFs; constrained
    (boundary-trace) DOFs are eliminated and held at zero.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    e_space: FemSpace
    j_space: FemSpace
    free_index: np.ndarray  # position in the free vector per full DOF, -1 fixed

    @property
    def n_e(self) -> int:
        return self.e_space.n_dofs

    def expand(self, x_free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Scatter a free-DOF vector into full (u_e, u_j) with zeros at the
        constrained DOFs."""
        full = np.zeros(self.n_e + self.j_space.n_dofs, dtype=complex)
        full[self.free_index >= 0] = x_free
        return full[:self.n_e], full[self.n_e:]


@dataclass
class SolutionPair:
    """Discrete electric field and hydrodynamic current on one mesh."""

    e_space: FemSpace
    j_space: FemSpace
    u_e: np.ndarray
    u_j: np.ndarray

    def e_local(self, pos):
        return self.e_space.solution_coeffs(self.u_e, pos)

    def j_local(self, pos):
        return self.j_space.solution_coeffs(self.u_j, pos)

    def eval_e(self, pos, pts):
        """Field and curl values at physical points of e-space elements."""
        C, D = self.e_local(pos)
        return _eval_local(self.e_space, pos, C, D, pts)

    def eval_j(self, pos, pts):
        C, D = self.j_local(pos)
        return _eval_local(self.j_space, pos, C, D, pts)


def _eval_local(space, pos, C, D, pts):
    u = space.to_local(pos, pts)
    nc, nq = u.shape[:2]
    tp = eval_terms(u.reshape(-1, 2), space._exps).reshape(nc, nq, -1)
    vals = np.einsum("ect,eqt->eqc", C, tp)
    tpd = eval_terms(u.reshape(-1, 2), poly.exponents(space.p)).reshape(nc, nq, -1)
    dvals = np.einsum("et,eqt->eq", D, tpd)
    return vals, dvals


# ---------------------------------------------------------------------------
# sources


def plane_wave(direction, polarization, k: float):
    """Incident plane wave x -> pol * exp(-i k d . x).

    Requires unit direction and polarization with pol orthogonal to d.
    """
    d = np.asarray(direction, dtype=float)
    p = np.asarray(polarization, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12 or abs(np.linalg.norm(p) - 1.0) > 1e-12:
        raise FemError("direction and polarization must be unit vectors")
    if abs(float(d @ p)) > 1e-12:
        raise FemError("polarization must be orthogonal to the direction")

    def field(x):
        x = np.asarray(x, dtype=float)
        phase = np.exp(-1j * k * (x @ d))
        return phase[..., None] * p

    def div(x):
        x = np.asarray(x, dtype=float)
        return -1j * k * float(d @ p) * np.exp(-1j * k * (x @ d))

    def curl(x):
        x = np.asarray(x, dtype=float)
        return -1j * k * float(d[0] * p[1] - d[1] * p[0]) * \
            np.exp(-1j * k * (x @ d))

    field.wavenumber = float(k)
    field.div = div
    field.curl = curl
    return field


# ---------------------------------------------------------------------------
# assembly


def _chunks(n, size=DEFAULT_CHUNK):
    for s in range(0, n, size):
        yield np.arange(s, min(s + size, n))


def _scatter(rows_out, cols_out, vals_out, local, row_dofs, col_dofs):
    nc, ni, nj = local.shape
    r = np.repeat(row_dofs[:, :, None], nj, axis=2)
    c = np.repeat(col_dofs[:, None, :], ni, axis=1)
    rows_out.append(r.ravel())
    cols_out.append(c.ravel())
    vals_out.append(local.ravel())


def element_loads(space: FemSpace, pos, f, tol=1e-10, base_degree=None,
                  max_degree=40):
    """Per-element load vectors int f . basis, with the quadrature order
    raised per element until the relative change drops below tol."""
    mesh = space.mesh
    g = space.elems[pos]
    verts = mesh.tri_coords[g]
    degree = base_degree if base_degree is not None else 2 * space.p + 4

    def compute(idx, deg):
        tq, tw = triangle_rule(deg)
        pts, detj = map_to_triangles(verts[idx], tq)
        vals, _ = space.eval_basis(pos[idx], pts)
        fv = f(pts.reshape(-1, 2)).reshape(len(idx), len(tw), 2)
        return np.einsum("eiqc,eqc,q->ei", vals, fv, tw) * detj[:, None]

    idx = np.arange(len(pos))
    out = compute(idx, degree)
    scale = max(float(np.max(np.abs(out))), 1e-300)
    while degree < max_degree and len(idx):
        nxt = compute(idx, degree + 6)
        diff = np.max(np.abs(nxt - out[idx]), axis=1)
        out[idx] = nxt
        idx = idx[diff > tol * scale]
        degree += 6
    return out


def assemble_system(coef: Coefficients, e_space: FemSpace, j_space: FemSpace,
                    j_source=None, k_source=None,
                    chunk=DEFAULT_CHUNK) -> System:
    """Assemble the coupled sesquilinear form and load vector.

    The form, with E test functions v and J test functions w (real basis):
      -w^2 (eps E, v) + (chi curl E, curl v) + i w (J, v)_m
      -w^2 (alpha J, w)_m + (zeta div J, div w)_m - i w (E, w)_m
    against the load i w (j_source, v) + i w (k_source, w)_m.
    """
    if e_space.mesh is not j_space.mesh:
        raise FemError("spaces must share one mesh")
    mesh = coef.mesh
    if mesh is not e_space.mesh:
        raise FemError("coefficients were built for a different mesh")
    omega = coef.omega
    nE = e_space.n_dofs
    n_all = nE + j_space.n_dofs
    rows, cols, vals = [], [], []

    qdeg = 2 * max(e_space.p, j_space.p) + 2

    # electric block over all elements
    for pos in _chunks(e_space.n_elems, chunk):
        g = e_space.elems[pos]
        verts = mesh.tri_coords[g]
        tq, tw = triangle_rule(qdeg)
        pts, detj = map_to_triangles(verts, tq)
        w = tw[None, :] * detj[:, None]
        vv, dv = e_space.eval_basis(pos, pts)
        eps_v = apply_tensor(coef.eps[g], vv)
        m_eps = weighted_inner(eps_v, vv, w + 0j)
        k_chi = weighted_inner(dv[:, :, :, None], dv[:, :, :, None],
                               w * coef.chi[g][:, None])
        local = -omega**2 * m_eps + k_chi
        dofs = e_space.elem_dofs[pos]
        _scatter(rows, cols, vals, local, dofs, dofs)

    # current block and coupling over metal elements
    for pos in _chunks(j_space.n_elems, chunk):
        g = j_space.elems[pos]
        verts = mesh.tri_coords[g]
        tq, tw = triangle_rule(qdeg)
        pts, detj = map_to_triangles(verts, tq)
        w = tw[None, :] * detj[:, None]
        jv, jd = j_space.eval_basis(pos, pts)
        m_j = weighted_inner(jv, jv, w)
        k_z = weighted_inner(jd[:, :, :, None], jd[:, :, :, None], w)
        local_jj = -omega**2 * coef.alpha * m_j + coef.zeta * k_z
        jdofs = j_space.elem_dofs[pos] + nE
        _scatter(rows, cols, vals, local_jj, jdofs, jdofs)

        epos = e_space.pos_of_global[g]
        ev, _ = e_space.eval_basis(epos, pts)
        c = weighted_inner(ev, jv, w)  # c[e, iE, jJ] = int phi_iE . psi_jJ
        edofs = e_space.elem_dofs[epos]
        _scatter(rows, cols, vals, 1j * omega * c, edofs, jdofs)
        _scatter(rows, cols, vals, -1j * omega * np.swapaxes(c, 1, 2),
                 jdofs, edofs)

    rhs = np.zeros(n_all, dtype=complex)
    if j_source is not None:
        for pos in _chunks(e_space.n_elems, chunk):
            load = element_loads(e_space, pos, j_source)
            np.add.at(rhs, e_space.elem_dofs[pos], 1j * omega * load)
    if k_source is not None:
        for pos in _chunks(j_space.n_elems, chunk):
            load = element_loads(j_space, pos, k_source)
            np.add.at(rhs, j_space.elem_dofs[pos] + nE, 1j * omega * load)

    A = sp.coo_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_all, n_all), dtype=complex).tocsr()

    free = np.concatenate([e_space.free, j_space.free])
    free_index = np.full(n_all, -1, dtype=np.int64)
    free_index[free] = np.arange(int(free.sum()))
    A = A[free][:, free].tocsr()
    return System(matrix=A, rhs=rhs[free], e_space=e_space, j_space=j_space,
                  free_index=free_index)


def export_matrix(path, system: System) -> None:
    """Write the reduced system matrix in Matrix Market format."""
    from scipy.io import mmwrite
    mmwrite(path, system.matrix)


# ---------------------------------------------------------------------------
# energy norm


def energy_norms_sq(coef: Coefficients, pair: SolutionPair,
                    chunk=DEFAULT_CHUNK) -> np.ndarray:
    """Per-element squared energy norm of a discrete pair:
    w^2 |E|^2_eps* + |curl E|^2_chi* + w^2 |J|^2_alpha* + |div J|^2_zeta*."""
    mesh = coef.mesh
    omega = coef.omega
    out = np.zeros(mesh.n_triangles)
    qdeg = 2 * (max(pair.e_space.p, pair.j_space.p) + 1)
    for pos in _chunks(pair.e_space.n_elems, chunk):
        g = pair.e_space.elems[pos]
        tq, tw = triangle_rule(qdeg)
        pts, detj = map_to_triangles(mesh.tri_coords[g], tq)
        ev, ec = pair.eval_e(pos, pts)
        w = tw[None, :] * detj[:, None]
        out[g] += omega**2 * coef.eps_star[g] * \
            np.einsum("eqc,eq->e", np.abs(ev) ** 2, w)
        out[g] += coef.chi_star[g] * np.einsum("eq,eq->e", np.abs(ec) ** 2, w)
    for pos in _chunks(pair.j_space.n_elems, chunk):
        g = pair.j_space.elems[pos]
        tq, tw = triangle_rule(qdeg)
        pts, detj = map_to_triangles(mesh.tri_coords[g], tq)
        jv, jd = pair.eval_j(pos, pts)
        w = tw[None, :] * detj[:, None]
        out[g] += omega**2 * coef.alpha_star * \
            np.einsum("eqc,eq->e", np.abs(jv) ** 2, w)
        out[g] += coef.zeta_star * np.einsum("eq,eq->e", np.abs(jd) ** 2, w)
    return out


def energy_norm(coef: Coefficients, pair: SolutionPair) -> float:
    return float(np.sqrt(energy_norms_sq(coef, pair).sum()))
