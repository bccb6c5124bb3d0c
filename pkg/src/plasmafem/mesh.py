"""Conforming triangle meshes with region tags and bisection refinement.

The domain is a square (-L-ell, L+ell)^2 holding a metal polygon inside the
inner box (-L, L)^2 and an absorbing frame ``max(|x1|,|x2|) > L``. Initial
meshes are built by slab decomposition around the (x-monotone) metal polygon,
ear clipping, and Delaunay edge flips; refinement is newest-vertex bisection
with conforming closure, driven by a per-vertex size field.

Meshes are immutable; :func:`refine` returns a new mesh. The triangle
connectivity convention is: positively oriented, with the bisection edge
stored first, i.e. edge (t[0], t[1]) is split when the triangle is bisected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

VACUUM, METAL, PML = 0, 1, 2
REGION_NAMES = {VACUUM: "vacuum", METAL: "metal", PML: "pml"}

_AREA_EPS = 1e-12


class MeshError(Exception):
    pass


# ---------------------------------------------------------------------------
# basic predicates


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polygon_area(pts) -> float:
    pts = np.asarray(pts, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper intersection of open segments p1-p2 and p3-p4."""
    d1 = _cross(p3, p4, p1)
    d2 = _cross(p3, p4, p2)
    d3 = _cross(p1, p2, p3)
    d4 = _cross(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _check_simple_polygon(pts):
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    if n < 3:
        raise MeshError("polygon needs at least 3 vertices")
    if abs(polygon_area(pts)) < _AREA_EPS:
        raise MeshError("degenerate polygon: zero area")
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        if np.hypot(*(b - a)) < 1e-14:
            raise MeshError("degenerate polygon: repeated vertex")
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = pts[j], pts[(j + 1) % n]
            if _segments_intersect(a, b, c, d):
                raise MeshError("polygon is self-intersecting")


# ---------------------------------------------------------------------------
# mesh container


@dataclass
class Mesh2D:
    """Triangle mesh with per-element region tags.

    vertices: (nv, 2) float, coordinates in nm.
    triangles: (nt, 3) int, CCW; (t[0], t[1]) is the bisection edge.
    region: (nt,) int in {VACUUM, METAL, PML}.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.region = np.ascontiguousarray(self.region, dtype=np.int64)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def tri_coords(self) -> np.ndarray:
        """(nt, 3, 2) vertex coordinates per triangle."""
        return self.vertices[self.triangles]

    @cached_property
    def areas(self) -> np.ndarray:
        v = self.tri_coords
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def diameters(self) -> np.ndarray:
        v = self.tri_coords
        d01 = np.linalg.norm(v[:, 0] - v[:, 1], axis=1)
        d12 = np.linalg.norm(v[:, 1] - v[:, 2], axis=1)
        d20 = np.linalg.norm(v[:, 2] - v[:, 0], axis=1)
        return np.max(np.stack([d01, d12, d20]), axis=0)

    @cached_property
    def inradii(self) -> np.ndarray:
        v = self.tri_coords
        d01 = np.linalg.norm(v[:, 0] - v[:, 1], axis=1)
        d12 = np.linalg.norm(v[:, 1] - v[:, 2], axis=1)
        d20 = np.linalg.norm(v[:, 2] - v[:, 0], axis=1)
        return 2.0 * self.areas / (d01 + d12 + d20)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.tri_coords.mean(axis=1)

    # -- edge connectivity ---------------------------------------------------

    @cached_property
    def _edge_data(self):
        t = self.triangles
        raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        und = np.sort(raw, axis=1)
        edges, inv = np.unique(und, axis=0, return_inverse=True)
        tri_edge = inv.reshape(3, -1).T  # (nt, 3): local edges 01, 12, 20
        ne = edges.shape[0]
        edge_tri = np.full((ne, 2), -1, dtype=np.int64)
        order = np.argsort(inv, kind="stable")
        tri_of_slot = order % self.n_triangles
        eids = inv[order]
        first = np.ones(ne, dtype=bool)
        for slot, e in zip(tri_of_slot, eids):
            if first[e]:
                edge_tri[e, 0] = slot
                first[e] = False
            else:
                if edge_tri[e, 1] != -1:
                    raise MeshError(f"edge {e} has more than two incident triangles")
                edge_tri[e, 1] = slot
        return edges, tri_edge, edge_tri

    @property
    def edges(self) -> np.ndarray:
        """(ne, 2) unique undirected edges as sorted vertex pairs."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """(nt, 3) edge ids; local edge k joins t[k] and t[(k+1)%3]."""
        return self._edge_data[1]

    @property
    def edge_tris(self) -> np.ndarray:
        """(ne, 2) incident triangles, -1 when on the outer boundary."""
        return self._edge_data[2]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Mask of edges on the outer boundary of the domain."""
        return self.edge_tris[:, 1] == -1

    @cached_property
    def metal_boundary_edges(self) -> np.ndarray:
        """Mask of edges on the metal interface (one metal side exactly)."""
        et = self.edge_tris
        m = self.region == METAL
        left = m[et[:, 0]]
        right = np.where(et[:, 1] >= 0, m[np.maximum(et[:, 1], 0)], False)
        return left != right

    @cached_property
    def interior_metal_edges(self) -> np.ndarray:
        """Mask of edges with metal triangles on both sides."""
        et = self.edge_tris
        m = self.region == METAL
        return (et[:, 1] >= 0) & m[et[:, 0]] & m[et[:, 1]]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Unit normals per edge, the 90-degree clockwise turn of the unit
        tangent running from the lower to the higher vertex id."""
        e = self.edges
        t = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        t = t / np.linalg.norm(t, axis=1, keepdims=True)
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def region_area(self, region: int) -> float:
        return float(self.areas[self.region == region].sum())

    def geometry_of(self, k: int):
        """Diameter, inradius, area and per-edge geometry of triangle k."""
        if not 0 <= k < self.n_triangles:
            raise IndexError(f"triangle id {k} out of range")
        v = self.tri_coords[k]
        area = float(self.areas[k])
        edge_vec = np.array([v[1] - v[0], v[2] - v[1], v[0] - v[2]])
        lengths = np.linalg.norm(edge_vec, axis=1)
        tangents = edge_vec / lengths[:, None]
        normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
        # CCW triangle: the clockwise turn of the edge tangent points outward
        return TriangleGeometry(
            h=float(self.diameters[k]),
            rho=float(self.inradii[k]),
            area=area,
            edge_lengths=lengths,
            edge_tangents=tangents,
            edge_normals=normals,
        )


@dataclass
class TriangleGeometry:
    h: float
    rho: float
    area: float
    edge_lengths: np.ndarray
    edge_tangents: np.ndarray
    edge_normals: np.ndarray


@dataclass
class SizeField:
    """Target mesh size per vertex of the mesh it was generated on."""

    sizes: np.ndarray

    def __post_init__(self):
        self.sizes = np.asarray(self.sizes, dtype=np.float64)
        if not np.all(np.isfinite(self.sizes)) or np.any(self.sizes <= 0.0):
            raise MeshError("size field must be strictly positive and finite")


# ---------------------------------------------------------------------------
# audit


def audit(mesh: Mesh2D, expect_area: float | None = None) -> None:
    """Raise MeshError unless the mesh is a conforming triangulation."""
    if np.any(mesh.areas <= 0.0):
        raise MeshError("non-positive triangle orientation/area")
    t = mesh.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    seen = {}
    for a, b in directed:
        key = (int(a), int(b))
        if key in seen:
            raise MeshError(f"directed edge {key} repeated: inconsistent orientation")
        seen[key] = True
    # Every interior edge must be traversed once in each direction.
    bnd = []
    for (a, b) in seen:
        if (b, a) not in seen:
            bnd.append((a, b))
    lim = np.max(np.abs(mesh.vertices))
    for a, b in bnd:
        for v in (mesh.vertices[a], mesh.vertices[b]):
            if max(abs(v[0]), abs(v[1])) < lim - 1e-9:
                raise MeshError("boundary edge not on the domain boundary "
                                "(hanging node or hole)")
    if expect_area is not None:
        total = float(mesh.areas.sum())
        if abs(total - expect_area) > 1e-9 * max(1.0, expect_area):
            raise MeshError(f"area mismatch: {total} vs {expect_area}")


# ---------------------------------------------------------------------------
# ear clipping and Delaunay flips (initial mesh construction)


def _point_in_tri(p, a, b, c, eps):
    d1 = _cross(a, b, p)
    d2 = _cross(b, c, p)
    d3 = _cross(c, a, p)
    return d1 >= -eps and d2 >= -eps and d3 >= -eps


def _ear_clip(ids, coords):
    """Triangulate a simple CCW polygon given as vertex ids into coords."""
    ids = list(ids)
    scale = max(np.ptp([coords[i][0] for i in ids]),
                np.ptp([coords[i][1] for i in ids]))
    eps = 1e-12 * scale * scale
    tris = []
    guard = 0
    while len(ids) > 3:
        guard += 1
        if guard > 10000:
            raise MeshError("ear clipping failed to terminate")
        n = len(ids)
        clipped = False
        for k in range(n):
            a, b, c = ids[(k - 1) % n], ids[k], ids[(k + 1) % n]
            pa, pb, pc = coords[a], coords[b], coords[c]
            if _cross(pa, pb, pc) <= eps:
                continue
            ok = True
            for v in ids:
                if v in (a, b, c):
                    continue
                pv = coords[v]
                if _point_in_tri(pv, pa, pb, pc, eps):
                    ok = False
                    break
            if ok:
                tris.append((a, b, c))
                del ids[k]
                clipped = True
                break
        if not clipped:
            raise MeshError("no ear found; polygon may be non-simple")
    a, b, c = ids
    if _cross(coords[a], coords[b], coords[c]) <= eps:
        raise MeshError("degenerate final ear")
    tris.append((a, b, c))
    return tris


def _delaunay_flips(tris, groups, coords, max_passes=200):
    """Lawson flips within each flip group; constrained edges lie between
    groups and are never touched."""
    tris = [list(t) for t in tris]
    groups = list(groups)

    def incircle_bad(a, b, c, d):
        # True when d is strictly inside the circumcircle of ccw (a, b, c)
        m = np.array([
            [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
            [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
            [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
        ])
        return np.linalg.det(m) > 1e-12

    for _ in range(max_passes):
        edge_map = {}
        for ti, t in enumerate(tris):
            for k in range(3):
                key = tuple(sorted((t[k], t[(k + 1) % 3])))
                edge_map.setdefault(key, []).append(ti)
        flipped = False
        for (va, vb), owners in edge_map.items():
            if len(owners) != 2:
                continue
            t1, t2 = owners
            if groups[t1] != groups[t2]:
                continue
            o1 = [v for v in tris[t1] if v not in (va, vb)][0]
            o2 = [v for v in tris[t2] if v not in (va, vb)][0]
            pa, pb = coords[va], coords[vb]
            p1, p2 = coords[o1], coords[o2]
            # flip only when the shared quad is strictly convex
            if _cross(p1, pa, p2) <= 0 or _cross(p2, pb, p1) <= 0:
                continue
            if not incircle_bad(*_ccw3(pa, pb, p1), p2):
                continue
            tris[t1] = _ccw_ids(o1, va, o2, coords)
            tris[t2] = _ccw_ids(o2, vb, o1, coords)
            flipped = True
            break  # edge map is stale after a flip
        if not flipped:
            break
    return [tuple(t) for t in tris], groups


def _ccw3(a, b, c):
    return (a, b, c) if _cross(a, b, c) > 0 else (a, c, b)


def _ccw_ids(i, j, k, coords):
    if _cross(coords[i], coords[j], coords[k]) > 0:
        return [i, j, k]
    return [i, k, j]


# ---------------------------------------------------------------------------
# slab decomposition of the scattering domain


def _monotone_chains(poly):
    """Split a CCW polygon boundary at its x-extreme vertices.

    Returns (lower, upper, left, right): the lower and upper chains run
    left to right, the left and right chains bottom to top along the
    (possibly degenerate) extreme sides. Extremes are detected with a
    relative tolerance so near-vertical extreme edges stay intact. Raises
    for polygons that are not x-monotone.
    """
    pts = [tuple(map(float, p)) for p in poly]
    n = len(pts)
    xs = [p[0] for p in pts]
    tol = 1e-12 * max(np.ptp(xs), 1.0)
    x0, x1 = min(xs), max(xs)
    left_set = [k for k in range(n) if pts[k][0] <= x0 + tol]
    right_set = [k for k in range(n) if pts[k][0] >= x1 - tol]
    a_top = max(left_set, key=lambda k: pts[k][1])
    a_bot = min(left_set, key=lambda k: pts[k][1])
    b_top = max(right_set, key=lambda k: pts[k][1])
    b_bot = min(right_set, key=lambda k: pts[k][1])

    def walk(src, dst):
        out = []
        k = src
        while True:
            out.append(pts[k])
            if k == dst:
                return out
            k = (k + 1) % n
            if len(out) > n:
                raise MeshError("failed to split polygon boundary")

    upper = walk(b_top, a_top)[::-1]   # CCW runs right to left on top
    lower = walk(a_bot, b_bot)        # CCW runs left to right on bottom
    left = walk(a_top, a_bot)[::-1]   # CCW runs top to bottom on the left
    right = walk(b_bot, b_top)
    for chain in (lower, upper):
        dx = np.diff([p[0] for p in chain])
        if np.any(dx < -tol):
            raise MeshError("metal polygon is not x-monotone; "
                            "cannot run slab decomposition")
    return lower, upper, left, right


class _VertexPool:
    def __init__(self):
        self.coords = []
        self._index = {}

    def add(self, p):
        key = (float(p[0]), float(p[1]))
        if key not in self._index:
            self._index[key] = len(self.coords)
            self.coords.append(key)
        return self._index[key]


def build_domain_mesh(polygon, L: float, ell: float, h0: float) -> Mesh2D:
    """Initial mesh of (-L-ell, L+ell)^2 around a metal polygon.

    The metal polygon must be x-monotone, strictly inside (-L, L)^2, and
    simple. ``ell = 0`` produces a mesh without an absorbing frame. The mesh
    resolves all region boundaries exactly and has every diameter <= h0.
    """
    if h0 <= 0.0:
        raise MeshError("h0 must be positive")
    if L <= 0.0 or ell < 0.0:
        raise MeshError("need L > 0 and ell >= 0")
    poly = [tuple(map(float, p)) for p in polygon]
    _check_simple_polygon(poly)
    if polygon_area(poly) < 0:
        poly = poly[::-1]
    px = [p[0] for p in poly]
    py = [p[1] for p in poly]
    margin = 1e-9
    if max(max(map(abs, px)), max(map(abs, py))) >= L - margin:
        raise MeshError("metal polygon must lie strictly inside the inner box")

    lower, upper, left_chain, right_chain = _monotone_chains(poly)
    # slab boundary x values; corners follow the actual chain endpoints so
    # near-vertical extreme edges do not produce sliver pieces
    xbl, xbr = lower[0][0], lower[-1][0]
    xtl, xtr = upper[0][0], upper[-1][0]

    pool = _VertexPool()
    pieces = []  # (vertex-id list CCW, region, group)

    def add_piece(coords, region, group):
        ids = [pool.add(p) for p in coords]
        if polygon_area(coords) < 0:
            ids = ids[::-1]
        pieces.append((ids, region, group))

    # metal polygon
    add_piece(poly, METAL, "metal")

    # vacuum: left slab, right slab, strips above and below the chains
    add_piece([(-L, -L), (xbl, -L)] + left_chain + [(xtl, L), (-L, L)],
              VACUUM, "vacuum")
    add_piece([(xbr, -L), (L, -L), (L, L), (xtr, L)] + right_chain[::-1],
              VACUUM, "vacuum")
    add_piece(upper + [(xtr, L), (xtl, L)], VACUUM, "vacuum")
    add_piece(lower[::-1] + [(xbl, -L), (xbr, -L)], VACUUM, "vacuum")

    if ell > 0.0:
        R = L + ell
        bottom = [(x, -L) for x in [-L] + sorted({xbl, xbr}) + [L]]
        top = [(x, L) for x in [-L] + sorted({xtl, xtr}) + [L]]
        add_piece([(-L, -R), (L, -R), (L, -L)] + bottom[::-1][1:-1] + [(-L, -L)],
                  PML, "pml_s")
        add_piece([(L, R), (-L, R), (-L, L)] + top[1:-1] + [(L, L)], PML, "pml_n")
        add_piece([(-R, -L), (-L, -L), (-L, L), (-R, L)], PML, "pml_w")
        add_piece([(L, -L), (R, -L), (R, L), (L, L)], PML, "pml_e")
        add_piece([(-R, -R), (-L, -R), (-L, -L), (-R, -L)], PML, "pml_sw")
        add_piece([(L, -R), (R, -R), (R, -L), (L, -L)], PML, "pml_se")
        add_piece([(R, L), (R, R), (L, R), (L, L)], PML, "pml_ne")
        add_piece([(-L, R), (-R, R), (-R, L), (-L, L)], PML, "pml_nw")

    tris, regions, groups = [], [], []
    for ids, region, group in pieces:
        for t in _ear_clip(ids, pool.coords):
            tris.append(t)
            regions.append(region)
            groups.append(group)
    tris, _ = _delaunay_flips(tris, groups, pool.coords)

    mesh = _finalize(pool.coords, tris, regions)
    mesh = refine(mesh, SizeField(np.full(mesh.n_vertices, h0)))
    audit(mesh, expect_area=(2 * (L + ell)) ** 2)
    return mesh


def build_scenario_mesh(scenario, h0: float) -> Mesh2D:
    """Mesh for an object exposing ``polygon``, ``L`` and ``ell``."""
    return build_domain_mesh(scenario.polygon, scenario.L, scenario.ell, h0)


def _longest_edge_first(tri, coords):
    """Cyclic rotation of a CCW triangle putting the longest edge first."""
    best, best_key = tri, None
    for r in range(3):
        t = tri[r:] + tri[:r]
        a, b = coords[t[0]], coords[t[1]]
        ln = (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2
        key = (ln, -min(t[0], t[1]), -max(t[0], t[1]))
        if best_key is None or key > best_key:
            best, best_key = t, key
    return best


def _finalize(coords, tris, regions) -> Mesh2D:
    coords = np.asarray(coords, dtype=np.float64)
    out = []
    for t in tris:
        t = list(t)
        if _cross(coords[t[0]], coords[t[1]], coords[t[2]]) < 0:
            t = [t[0], t[2], t[1]]
        out.append(_longest_edge_first(t, coords))
    return Mesh2D(coords, np.array(out), np.asarray(regions))


# ---------------------------------------------------------------------------
# newest-vertex bisection


class _Refiner:
    """Mutable triangulation state for a single refinement session."""

    def __init__(self, mesh: Mesh2D, targets: np.ndarray):
        self.coords = [tuple(p) for p in mesh.vertices]
        self.tris = [tuple(t) for t in mesh.triangles]
        self.region = list(mesh.region)
        self.target = list(targets)
        self.alive = [True] * len(self.tris)
        self.h = [float(h) for h in mesh.diameters]
        self.edge_owner = {}
        for i, t in enumerate(self.tris):
            self._register(i)
        self.midpoint = {}
        self.n_bisections = 0

    def _register(self, i):
        t = self.tris[i]
        for k in range(3):
            key = (min(t[k], t[(k + 1) % 3]), max(t[k], t[(k + 1) % 3]))
            self.edge_owner.setdefault(key, set()).add(i)

    def _unregister(self, i):
        t = self.tris[i]
        for k in range(3):
            key = (min(t[k], t[(k + 1) % 3]), max(t[k], t[(k + 1) % 3]))
            self.edge_owner[key].discard(i)

    def _midpoint(self, a, b):
        key = (min(a, b), max(a, b))
        if key not in self.midpoint:
            pa, pb = self.coords[a], self.coords[b]
            self.coords.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
            self.midpoint[key] = len(self.coords) - 1
        return self.midpoint[key]

    def _diam(self, t):
        p = [self.coords[v] for v in t]
        return max(np.hypot(p[i][0] - p[j][0], p[i][1] - p[j][1])
                   for i, j in ((0, 1), (1, 2), (2, 0)))

    def _bisect(self, i):
        v0, v1, v2 = self.tris[i]
        m = self._midpoint(v0, v1)
        self._unregister(i)
        self.alive[i] = False
        kids = []
        for child in ((v2, v0, m), (v1, v2, m)):
            self.tris.append(child)
            self.region.append(self.region[i])
            self.target.append(self.target[i])
            self.alive.append(True)
            self.h.append(self._diam(child))
            j = len(self.tris) - 1
            self._register(j)
            kids.append(j)
        self.n_bisections += 1
        return kids

    def _neighbor(self, i):
        v0, v1, _ = self.tris[i]
        key = (min(v0, v1), max(v0, v1))
        for j in self.edge_owner.get(key, ()):
            if j != i and self.alive[j]:
                return j
        return None

    def ensure_bisected(self, i, cap=100000):
        """Bisect triangle i, recursively pre-bisecting incompatible
        neighbors (conforming closure)."""
        stack = [i]
        guard = 0
        while stack:
            guard += 1
            if guard > cap:
                raise MeshError("conforming closure did not terminate; "
                                "pathological size-field gradation")
            t = stack[-1]
            if not self.alive[t]:
                stack.pop()
                continue
            n = self._neighbor(t)
            if n is None:
                self._bisect(t)
                stack.pop()
                continue
            tv = self.tris[t]
            nv = self.tris[n]
            shared = (min(tv[0], tv[1]), max(tv[0], tv[1]))
            n_edge = (min(nv[0], nv[1]), max(nv[0], nv[1]))
            if shared == n_edge:
                self._bisect(t)
                self._bisect(n)
                stack.pop()
            else:
                stack.append(n)

    def run_to_size(self, max_sweeps=200):
        for _ in range(max_sweeps):
            marked = [i for i in range(len(self.tris))
                      if self.alive[i] and self.h[i] > self.target[i] * (1 + 1e-12)]
            if not marked:
                return
            for i in marked:
                if self.alive[i]:
                    self.ensure_bisected(i)
        raise MeshError("size-driven refinement exceeded the sweep cap")

    def to_mesh(self) -> Mesh2D:
        keep = [k for k in range(len(self.tris)) if self.alive[k]]
        tris = np.array([self.tris[k] for k in keep], dtype=np.int64)
        region = np.array([self.region[k] for k in keep], dtype=np.int64)
        return Mesh2D(np.asarray(self.coords), tris, region)


def refine(mesh: Mesh2D, sizes: SizeField) -> Mesh2D:
    """Bisect until every triangle diameter satisfies the vertex size field.

    The per-triangle target is the minimum of the sizes at the triangle's
    vertices, inherited by all descendants, so the request acts as an upper
    bound on the local output diameters.
    """
    if len(sizes.sizes) != mesh.n_vertices:
        raise MeshError("size field does not match mesh vertices")
    targets = np.min(sizes.sizes[mesh.triangles], axis=1)
    r = _Refiner(mesh, targets)
    r.run_to_size()
    return r.to_mesh()


def bisect_all(mesh: Mesh2D, generations: int = 1) -> Mesh2D:
    """Uniform refinement: bisect every triangle once per generation."""
    out = mesh
    for _ in range(generations):
        r = _Refiner(out, np.full(out.n_triangles, np.inf))
        for i in range(out.n_triangles):
            if r.alive[i]:
                r.ensure_bisected(i)
        out = r.to_mesh()
    return out


# ---------------------------------------------------------------------------
# VTK-style plain-text io


def write_vtk(path, mesh: Mesh2D, cell_data=None, point_data=None) -> None:
    """Write a legacy-VTK ASCII unstructured grid with the region tag and
    optional extra per-cell / per-point scalar fields."""
    cell_data = dict(cell_data or {})
    point_data = dict(point_data or {})
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\nplasmafem mesh\nASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        nt = mesh.n_triangles
        f.write(f"CELLS {nt} {4 * nt}\n")
        for t in mesh.triangles:
            f.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        f.write(f"CELL_TYPES {nt}\n")
        f.write("5\n" * nt)
        f.write(f"CELL_DATA {nt}\n")
        f.write("SCALARS region int 1\nLOOKUP_TABLE default\n")
        f.write("\n".join(str(int(r)) for r in mesh.region) + "\n")
        for name, values in cell_data.items():
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            f.write("\n".join(repr(float(v)) for v in values) + "\n")
        if point_data:
            f.write(f"POINT_DATA {mesh.n_vertices}\n")
            for name, values in point_data.items():
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                f.write("\n".join(repr(float(v)) for v in values) + "\n")


def read_vtk(path) -> Mesh2D:
    """Read a mesh written by :func:`write_vtk` (round-trip exact)."""
    with open(path) as f:
        tokens = f.read().split("\n")
    it = iter(range(len(tokens)))
    lines = tokens

    def find(prefix):
        for k, line in enumerate(lines):
            if line.startswith(prefix):
                return k
        raise MeshError(f"missing {prefix!r} section")

    k = find("POINTS")
    nv = int(lines[k].split()[1])
    verts = np.array([[float(w) for w in lines[k + 1 + i].split()[:2]]
                      for i in range(nv)])
    k = find("CELLS")
    nt = int(lines[k].split()[1])
    tris = np.array([[int(w) for w in lines[k + 1 + i].split()[1:4]]
                     for i in range(nt)])
    k = find("SCALARS region")
    region = np.array([int(lines[k + 2 + i]) for i in range(nt)])
    return Mesh2D(verts, tris, region)
