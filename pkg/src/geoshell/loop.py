"""Loop subdivision surfaces: refinement, exact limit jets and mid-edge quadrature.

Regular patches (three valence-6 corners) are quartic box-spline triangles over
a 12-vertex stencil.  A patch with one extraordinary corner of valence ``N`` is
evaluated from its ``N + 6`` vertex stencil by repeatedly subdividing the
corner triangle until the query point falls into a regular sub-triangle; the
repeated subdivision uses the eigen-decomposition of the local subdivision
matrix, cached per valence.

Parameters of a patch are ``(v, w)`` with barycentric coordinates
``(1 - v - w, v, w)`` relative to ``PatchDescriptor.corners``; the
extraordinary vertex, if any, is always ``corners[0]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DomainError, UnsupportedMeshError
from .mesh import Shell, Topology

__all__ = [
    "loop_beta", "subdivision_matrix", "refine_once", "box_spline_basis",
    "PatchDescriptor", "SurfaceJet", "QuadraturePoint", "patch", "patches",
    "jet_weights", "evaluate_jet", "quadrature", "MID_EDGE_POINTS",
    "MIN_VALENCE", "MAX_VALENCE", "jet_operator", "limit_matrix", "interpolating_controls",
]

MIN_VALENCE, MAX_VALENCE = 3, 12

# Lattice coordinates of the regular stencil; the patch triangle is
# (0,0), (1,0), (1,1), i.e. point = u*(0,0) + v*(1,0) + w*(1,1).
STENCIL = ((0, 0), (1, 0), (1, 1), (0, 1), (-1, 0), (0, -1), (-1, -1),
           (2, 0), (1, -1), (2, 1), (1, 2), (2, 2))

# Exponents (p, q) of v**p * w**q.
MONOMIALS = tuple((p, q) for p in range(5) for q in range(5 - p))

# Box-spline basis on the regular patch, times 12; row i belongs to STENCIL[i].
_BOX_COEFFS = np.array([
    [6, 0, -12, 8, -1, 0, -12, 12, -2, -12, 12, 0, 8, -2, -1],
    [1, 2, 0, -4, 2, 4, 6, -12, 4, 6, -6, 0, -4, -2, -1],
    [1, 4, 6, -4, -1, 2, 6, -6, -2, 0, -12, 0, -4, 4, 2],
    [1, 2, 0, -4, 2, -2, -6, 0, 4, 0, 6, 0, 2, -2, -1],
    [1, -2, 0, 2, -1, -4, 6, 0, -2, 6, -6, 0, -4, 2, 1],
    [1, -2, 0, 2, -1, 2, -6, 6, -2, 0, 0, 0, -4, 4, 2],
    [1, -4, 6, -4, 1, -2, 6, -6, 2, 0, 0, 0, 2, -2, -1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, -2, -1],
    [0, 0, 0, 2, -1, 0, 0, 6, -2, 0, 6, 0, 2, -2, -1],
    [0, 0, 0, 2, -1, 0, 0, 0, -2, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0],
], dtype=float) / 12.0

# Mid-edge quadrature nodes as barycentric (u, v, w); each weighs 1/6,
# a third of the parametric triangle area.
MID_EDGE_POINTS = ((0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5))
MID_EDGE_WEIGHT = 1.0 / 6.0


def loop_beta(n):
    """Even-vertex neighbour weight of Loop's scheme for valence ``n``."""
    return (5.0 / 8.0 - (3.0 / 8.0 + 0.25 * np.cos(2.0 * np.pi / n)) ** 2) / n


def _monomial_jet(v, w):
    """Values and derivatives of the 15 quartic monomials, shape (6, 15)."""
    out = np.zeros((6, len(MONOMIALS)))

    def pw(x, k):
        return x ** k if k >= 0 else 0.0

    for j, (p, q) in enumerate(MONOMIALS):
        out[0, j] = pw(v, p) * pw(w, q)
        out[1, j] = p * pw(v, p - 1) * pw(w, q)
        out[2, j] = q * pw(v, p) * pw(w, q - 1)
        out[3, j] = p * (p - 1) * pw(v, p - 2) * pw(w, q)
        out[4, j] = p * q * pw(v, p - 1) * pw(w, q - 1)
        out[5, j] = q * (q - 1) * pw(v, p) * pw(w, q - 2)
    return out


def box_spline_basis(v, w):
    """Regular-patch basis at ``(v, w)``: rows are value, d_v, d_w, d_vv, d_vw, d_ww."""
    return _monomial_jet(v, w) @ _BOX_COEFFS.T


# -- refinement ----------------------------------------------------------------

def subdivision_matrix(topology, strict=True):
    """One Loop step as a linear map.

    Returns ``(fine_topology, S, valid)`` where ``S`` is a CSR matrix with
    ``fine = S @ coarse``.  New vertex ``n + e`` sits on edge ``e`` of
    ``topology.edges``; face ``f`` becomes faces ``4f .. 4f+3``.  With
    ``strict=False`` rows whose stencil leaves the mesh are left empty and
    flagged in ``valid``; otherwise such rows raise.
    """
    n = topology.n_vertices
    edges = topology.edges
    eidx = topology.edge_index
    opp = topology.opposite
    rows, cols, vals = [], [], []
    valid = np.zeros(n + len(edges), dtype=bool)

    for v, ring in enumerate(topology.rings):
        if ring is None:
            if strict:
                raise UnsupportedMeshError(f"boundary vertex {v}: closed meshes only")
            continue
        k = len(ring)
        b = loop_beta(k)
        rows += [v] * (k + 1)
        cols += [v] + ring
        vals += [1.0 - k * b] + [b] * k
        valid[v] = True

    for e, (a, b) in enumerate(edges.tolist()):
        c, d = opp.get((a, b)), opp.get((b, a))
        if c is None or d is None:
            if strict:
                raise UnsupportedMeshError(f"boundary edge ({a}, {b}): closed meshes only")
            continue
        rows += [n + e] * 4
        cols += [a, b, c, d]
        vals += [0.375, 0.375, 0.125, 0.125]
        valid[n + e] = True

    S = sp.csr_matrix((vals, (rows, cols)), shape=(n + len(edges), n))

    f = topology.faces
    m = np.empty_like(f)
    for j, (p, q) in enumerate(((0, 1), (1, 2), (2, 0))):
        lo = np.minimum(f[:, p], f[:, q])
        hi = np.maximum(f[:, p], f[:, q])
        m[:, j] = [n + eidx[(x, y)] for x, y in zip(lo.tolist(), hi.tolist())]
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    mab, mbc, mca = m[:, 0], m[:, 1], m[:, 2]
    fine = np.stack([
        np.stack([a, mab, mca], 1), np.stack([mab, b, mbc], 1),
        np.stack([mca, mbc, c], 1), np.stack([mab, mbc, mca], 1),
    ], axis=1).reshape(-1, 3)
    return Topology(n + len(edges), fine), S, valid


def refine_once(topology, shell):
    """Loop-refine a closed mesh; returns ``(fine_topology, fine_shell)``."""
    if not topology.is_closed:
        raise UnsupportedMeshError("Loop refinement needs a closed mesh")
    fine, S, _ = subdivision_matrix(topology)
    return fine, Shell(fine, S @ shell.positions, check=False)


# -- stencils ------------------------------------------------------------------

def _rot60(d):
    return (d[0] - d[1], d[0])


def regular_stencil(topology, corners):
    """12 stencil vertices (``STENCIL`` order) of a triangle with valence-6 corners.

    Walks the three corner fans in lattice coordinates.  Two slots may hold the
    same vertex (next to a valence-3 vertex); the limit patch only depends on
    slot values, so that is accepted.
    """
    opp = topology.opposite
    p0, p1, p2 = corners
    slot = {(0, 0): p0, (1, 0): p1, (1, 1): p2}
    for lv, lu in (((0, 0), (1, 0)), ((1, 0), (1, 1)), ((1, 1), (0, 0))):
        v, cur = slot[lv], slot[lu]
        lc = lu
        for _ in range(6):
            nxt = opp.get((v, cur))
            if nxt is None:
                raise UnsupportedMeshError(f"vertex {v} has an open fan")
            d = _rot60((lc[0] - lv[0], lc[1] - lv[1]))
            lc = (lv[0] + d[0], lv[1] + d[1])
            if slot.setdefault(lc, nxt) != nxt:
                raise UnsupportedMeshError("inconsistent regular stencil")
            cur = nxt
        if lc != lu:
            raise UnsupportedMeshError(f"vertex {v} is not regular")
    return tuple(slot[c] for c in STENCIL)


def _irregular_stencil(topology, corners):
    """``c, r_0..r_{N-1}, o_0..o_4`` for a patch whose first corner is extraordinary."""
    opp = topology.opposite
    c, r0, r1 = corners
    ring = topology.one_ring(c)
    i = ring.index(r0)
    ring = ring[i:] + ring[:i]
    if ring[1] != r1:
        raise UnsupportedMeshError("inconsistent orientation around extraordinary vertex")
    rl = ring[-1]
    try:
        o0 = opp[(r0, rl)]
        o1 = opp[(r0, o0)]
        o2 = opp[(r0, o1)]
        o3 = opp[(r1, o2)]
        o4 = opp[(r1, o3)]
    except KeyError:
        raise UnsupportedMeshError("open mesh around extraordinary patch") from None
    if opp.get((r1, r0)) != o2 or opp.get((ring[2 % len(ring)], r1)) != o4:
        raise UnsupportedMeshError("neighbours of an extraordinary vertex must be regular")
    st = (c, *ring, o0, o1, o2, o3, o4)
    if len(set(st)) != len(st):
        raise UnsupportedMeshError("stencil wraps onto itself; mesh too coarse")
    return st


@dataclass(frozen=True)
class PatchDescriptor:
    """Support data of the limit-surface patch over one control triangle.

    ``corners`` orders the face so that an extraordinary vertex comes first;
    ``irregular_corner`` is its position within the face as stored in the
    topology (``None`` for regular patches).
    """

    face_index: int
    corners: tuple
    ring: tuple
    irregular_corner: int | None = None

    @property
    def valence(self):
        return len(self.ring) - 6 if self.irregular_corner is not None else 6


def patch(topology, face_index):
    face = tuple(int(i) for i in topology.faces[face_index])
    val = topology.valence
    irregular = [j for j in range(3) if val[face[j]] != 6]
    if len(irregular) > 1:
        raise UnsupportedMeshError(
            f"face {face_index} has {len(irregular)} extraordinary vertices; "
            "refine the mesh once first")
    if not irregular:
        return PatchDescriptor(face_index, face, regular_stencil(topology, face))
    j = irregular[0]
    n = int(val[face[j]])
    if not MIN_VALENCE <= n <= MAX_VALENCE:
        raise UnsupportedMeshError(f"valence {n} outside {MIN_VALENCE}..{MAX_VALENCE}")
    corners = face[j:] + face[:j]
    return PatchDescriptor(face_index, corners, _irregular_stencil(topology, corners), j)


def patches(topology):
    if not topology.is_closed:
        raise UnsupportedMeshError("subdivision patches need a closed mesh")
    return [patch(topology, f) for f in range(topology.n_faces)]


# -- extraordinary patches -----------------------------------------------------

@dataclass(frozen=True)
class _IrregularData:
    valence: int
    A: np.ndarray                 # (K, K) stencil -> stencil of the corner sub-triangle
    picks: tuple                  # per regular child: (P (12, K), origin (2,), Jinv (2, 2))
    eig: tuple | None             # (V, lam, Vinv) when A is safely diagonalizable

    def power(self, m):
        if m == 0:
            return np.eye(self.A.shape[0])
        if self.eig is not None:
            V, lam, Vinv = self.eig
            return np.real((V * lam ** m) @ Vinv)
        return np.linalg.matrix_power(self.A, m)


def _canonical_faces(n):
    r = [1 + i for i in range(n)]
    o = [n + 1 + i for i in range(5)]
    faces = [(0, r[i], r[(i + 1) % n]) for i in range(n)]
    faces += [(r[-1], o[0], r[0]), (r[0], o[0], o[1]), (r[0], o[1], o[2]),
              (r[0], o[2], r[1]), (r[1], o[2], o[3]), (r[1], o[3], o[4]),
              (r[1], o[4], r[2])]
    return faces


@lru_cache(maxsize=None)
def irregular_data(n):
    """Local subdivision structure for an extraordinary patch of valence ``n``."""
    if not MIN_VALENCE <= n <= MAX_VALENCE:
        raise UnsupportedMeshError(f"valence {n} outside {MIN_VALENCE}..{MAX_VALENCE}")
    K = n + 6
    top = Topology(K, _canonical_faces(n))
    fine, S, valid = subdivision_matrix(top, strict=False)
    S = S.toarray()
    eidx = top.edge_index

    def odd(a, b):
        return K + eidx[(min(a, b), max(a, b))]

    r = [1 + i for i in range(n)]
    new = [0] + [odd(0, ri) for ri in r]
    new += [odd(r[-1], r[0]), r[0], odd(r[0], r[1]), r[1], odd(r[1], r[2])]
    if not valid[new].all():
        raise AssertionError("incomplete local subdivision stencil")
    A = S[new]

    # Children 1..3 of face 0 = (c, r0, r1); parameters of their corners in
    # the parent patch.
    par = {0: (0.0, 0.0), r[0]: (1.0, 0.0), r[1]: (0.0, 1.0),
           odd(0, r[0]): (0.5, 0.0), odd(r[0], r[1]): (0.5, 0.5),
           odd(r[1], 0): (0.0, 0.5)}
    picks = []
    for child in (1, 2, 3):
        corners = tuple(int(i) for i in fine.faces[child])
        st = regular_stencil(fine, corners)
        if not valid[list(st)].all():
            raise AssertionError("incomplete regular sub-stencil")
        P0, P1, P2 = (np.array(par[c]) for c in corners)
        M = np.column_stack([P1 - P0, P2 - P0])
        picks.append((S[list(st)], P0, np.linalg.inv(M)))

    lam, V = np.linalg.eig(A)
    eig = None
    if np.linalg.cond(V) < 1e8:
        Vinv = np.linalg.inv(V)
        if np.allclose((V * lam) @ Vinv, A, atol=1e-12, rtol=0):
            eig = (V, lam, Vinv)
    return _IrregularData(n, A, tuple(picks), eig)


def _irregular_weights(n, v, w):
    s = v + w
    if s <= 0.0:
        raise DomainError("evaluation at an extraordinary vertex")
    data = irregular_data(n)
    level = 1
    while s < 0.5:
        s *= 2.0
        level += 1
    scale = 2.0 ** (level - 1)
    vs, ws = v * scale, w * scale
    k = 0 if vs >= 0.5 else (1 if ws >= 0.5 else 2)
    P, origin, Jinv = data.picks[k]
    v1, w1 = Jinv @ (np.array([vs, ws]) - origin)
    B = box_spline_basis(v1, w1)
    J = Jinv * scale
    out = np.empty_like(B)
    out[0] = B[0]
    out[1:3] = J.T @ B[1:3]
    H = np.array([[B[3], B[4]], [B[4], B[5]]])          # (2, 2, 12)
    HT = np.einsum("ai,ijk,jb->abk", J.T, H, J)
    out[3], out[4], out[5] = HT[0, 0], HT[0, 1], HT[1, 1]
    return out @ P @ data.power(level - 1)


def jet_weights(p, bary):
    """Linear weights ``(6, len(p.ring))`` mapping stencil positions to the jet."""
    u, v, w = (float(b) for b in bary)
    if min(u, v, w) < -1e-14 or abs(u + v + w - 1.0) > 1e-12:
        raise DomainError(f"barycentric coordinates {bary} outside the patch")
    if p.irregular_corner is None:
        return box_spline_basis(v, w)
    return _irregular_weights(p.valence, v, w)


@dataclass(frozen=True)
class SurfaceJet:
    position: np.ndarray
    first: np.ndarray      # (2, 3): d_v x, d_w x
    second: np.ndarray     # (3, 3): d_vv x, d_vw x, d_ww x

    @property
    def normal(self):
        n = np.cross(self.first[0], self.first[1])
        return n / np.linalg.norm(n)

    @property
    def first_form(self):
        a = self.first
        return a @ a.T

    @property
    def second_form(self):
        n = self.normal
        b = self.second @ n
        return np.array([[b[0], b[1]], [b[1], b[2]]])


def evaluate_jet(shell, p, bary):
    """Limit position and parametric derivatives of ``shell`` at ``bary`` in patch ``p``."""
    W = jet_weights(p, bary)
    X = shell.positions[list(p.ring)]
    J = W @ X
    return SurfaceJet(J[0], J[1:3], J[3:6])


@dataclass(frozen=True)
class QuadraturePoint:
    patch: PatchDescriptor
    bary: tuple
    weight: float


def quadrature(topology):
    """Mid-edge rule: three points per patch, parametric weight 1/6 each."""
    return [QuadraturePoint(p, b, MID_EDGE_WEIGHT)
            for p in patches(topology) for b in MID_EDGE_POINTS]


def jet_operator(topology, rows=(1, 2, 3, 4, 5)):
    """Sparse map from control positions to jets at all quadrature points.

    Returns a CSR matrix with ``len(rows) * 3F`` rows ordered
    ``(point, jet-row)``; jet rows index position, d_v, d_w, d_vv, d_vw, d_ww.
    """
    rows = list(rows)
    regular = [box_spline_basis(b[1], b[2])[rows] for b in MID_EDGE_POINTS]
    cached = {}
    R, C, V = [], [], []
    r = 0
    for p in patches(topology):
        ring = np.asarray(p.ring)
        for qi, b in enumerate(MID_EDGE_POINTS):
            if p.irregular_corner is None:
                W = regular[qi]
            else:
                key = (p.valence, qi)
                if key not in cached:
                    cached[key] = jet_weights(p, b)[rows]
                W = cached[key]
            nr = len(rows)
            R.append(np.repeat(np.arange(r, r + nr), len(ring)))
            C.append(np.tile(ring, nr))
            V.append(W.ravel())
            r += nr
    D = sp.csr_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))),
                      shape=(r, topology.n_vertices))
    return D


def limit_matrix(topology):
    """Sparse map from control positions to limit positions at the control vertices."""
    if not topology.is_closed:
        raise UnsupportedMeshError("limit positions need a closed mesh")
    rows, cols, vals = [], [], []
    for v, ring in enumerate(topology.rings):
        k = len(ring)
        chi = 1.0 / (3.0 / (8.0 * loop_beta(k)) + k)
        rows += [v] * (k + 1)
        cols += [v] + ring
        vals += [1.0 - k * chi] + [chi] * k
    n = topology.n_vertices
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def interpolating_controls(topology, points):
    """Control positions whose limit surface passes through ``points`` at the vertices."""
    return np.asarray(spsolve(limit_matrix(topology).tocsc(), np.asarray(points, dtype=float)))
