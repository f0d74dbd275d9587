"""The three deformation energies W[s, t] behind one interface.

Every backend is bound to a :class:`~geoshell.mesh.Topology` once
(:meth:`EnergyBackend.bind`); the bound object works on ``(M, 3)`` position
arrays and returns gradients as ``(M, 3)`` arrays and Hessian blocks as
``(3M, 3M)`` CSR matrices in vertex-major order (index ``3 i + c``).
"""
from __future__ import annotations

import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp

from .. import loop
from ..errors import CorrespondenceError
from ..mesh import Displacement, require_correspondence
from .assembly import LocalTerm
from .densities import MaterialParams


def _w_mem(tr, det, mat):
    lam, mu = mat[0], mat[1]
    return (0.5 * mu * tr + 0.25 * lam * det
            - 0.25 * (2.0 * mu + lam) * jnp.log(det) - mu - 0.25 * lam)


def _gram(a, b):
    return jnp.array([[a @ a, a @ b], [a @ b, b @ b]])


def _inv2(M):
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return jnp.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det, det


# -- local kernels ---------------------------------------------------------------

def fem_point(js, jt, w, mat):
    """Membrane plus bending contribution of one quadrature point.

    ``js``/``jt`` hold the parametric jet rows d_v, d_w, d_vv, d_vw, d_ww of
    the reference and deformed limit surfaces.
    """
    delta = mat[2]
    Is = _gram(js[0], js[1])
    It = _gram(jt[0], jt[1])
    Is_inv, det_s = _inv2(Is)

    def second(j):
        n = jnp.cross(j[0], j[1])
        n = n / jnp.sqrt(n @ n)
        return jnp.array([[j[2] @ n, j[3] @ n], [j[3] @ n, j[4] @ n]])

    A = Is_inv @ It
    det_t = It[0, 0] * It[1, 1] - It[0, 1] * It[1, 0]
    membrane = _w_mem(jnp.trace(A), det_t / det_s, mat)
    Q = Is_inv @ (second(jt) - second(js))
    bending = jnp.trace(Q @ Q)
    return w * jnp.sqrt(det_s) * (delta * membrane + delta ** 3 * bending)


def shells_membrane(xs, xt, w, mat):
    """Flat-triangle membrane energy of one face."""
    Is = _gram(xs[1] - xs[0], xs[2] - xs[0])
    It = _gram(xt[1] - xt[0], xt[2] - xt[0])
    Is_inv, det_s = _inv2(Is)
    det_t = It[0, 0] * It[1, 1] - It[0, 1] * It[1, 0]
    area = 0.5 * jnp.sqrt(det_s)
    return w * mat[2] * area * _w_mem(jnp.trace(Is_inv @ It), det_t / det_s, mat)


def _dihedral(x):
    a, b, c, d = x[0], x[1], x[2], x[3]
    e = b - a
    n1 = jnp.cross(e, c - a)
    n2 = jnp.cross(a - b, d - b)
    s = jnp.cross(n1, n2) @ e / jnp.sqrt(e @ e)
    return jnp.arctan2(s, n1 @ n2), n1, n2, e


def shells_hinge(xs, xt, w, mat):
    """Bending energy of one interior edge ``(a, b)`` with opposite vertices ``c, d``."""
    th_s, n1, n2, e = _dihedral(xs)
    th_t = _dihedral(xt)[0]
    area = 0.5 * (jnp.sqrt(n1 @ n1) + jnp.sqrt(n2 @ n2))
    return w * mat[2] ** 3 * (th_t - th_s) ** 2 * (e @ e) * 3.0 / area


# -- backends --------------------------------------------------------------------

class BoundEnergy:
    """A backend specialised to one topology."""

    def __init__(self, backend, topology):
        self.backend = backend
        self.topology = topology
        self.n = topology.n_vertices

    def energy(self, xs, xt):
        raise NotImplementedError

    def gradients(self, xs, xt):
        """``(W, W_1, W_2)`` with gradients shaped ``(M, 3)``."""
        raise NotImplementedError

    def derivatives(self, xs, xt):
        """``(W, W_1, W_2, H11, H12, H22)``."""
        raise NotImplementedError


class _TermEnergy(BoundEnergy):
    def __init__(self, backend, topology, terms):
        super().__init__(backend, topology)
        self.terms = terms
        self.mat = backend.params.as_array()

    def _run(self, xs, xt, order):
        xs = np.asarray(xs, dtype=float)
        xt = np.asarray(xt, dtype=float)
        out = None
        for term in self.terms:
            r = term.evaluate(xs, xt, self.mat, order)
            r = r if isinstance(r, tuple) else (r,)
            out = list(r) if out is None else [a + b for a, b in zip(out, r)]
        if order >= 1:
            out[1] = out[1].reshape(-1, 3)
            out[2] = out[2].reshape(-1, 3)
        if order == 2:
            out[3:] = [h.tocsr() for h in out[3:]]
        return out[0] if order == 0 else tuple(out)

    def energy(self, xs, xt):
        return self._run(xs, xt, 0)

    def gradients(self, xs, xt):
        return self._run(xs, xt, 1)

    def derivatives(self, xs, xt):
        return self._run(xs, xt, 2)


class EnergyBackend:
    """Base class; ``rigid_invariant`` marks energies blind to rigid motions of either argument."""

    kind = "abstract"
    rigid_invariant = False

    def __init__(self, params=None):
        self.params = MaterialParams() if params is None else params
        self._bound = {}

    def bind(self, topology):
        key = topology.key
        if key not in self._bound:
            self._bound[key] = self._bind(topology)
        return self._bound[key]

    def _bind(self, topology):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"


class FlatQuadratic(EnergyBackend):
    """W[s, t] = (t - s)^T A (t - s) on the stacked coordinates; a Euclidean stand-in."""

    kind = "flatQuadratic"

    def __init__(self, A=None, params=None):
        super().__init__(params)
        self.A = None if A is None else sp.csr_matrix(A)

    def _bind(self, topology):
        n3 = 3 * topology.n_vertices
        A = sp.identity(n3, format="csr") if self.A is None else self.A
        if A.shape != (n3, n3):
            raise CorrespondenceError(f"weight operator is {A.shape}, mesh needs {(n3, n3)}")
        return _FlatBound(self, topology, A)


class _FlatBound(BoundEnergy):
    def __init__(self, backend, topology, A):
        super().__init__(backend, topology)
        self.A = A

    def energy(self, xs, xt):
        d = (np.asarray(xt) - np.asarray(xs)).ravel()
        return float(d @ (self.A @ d))

    def gradients(self, xs, xt):
        d = (np.asarray(xt) - np.asarray(xs)).ravel()
        Ad = self.A @ d
        g = 2.0 * Ad
        return float(d @ Ad), -g.reshape(-1, 3), g.reshape(-1, 3)

    def derivatives(self, xs, xt):
        v, g1, g2 = self.gradients(xs, xt)
        H = (2.0 * self.A).tocsr()
        return v, g1, g2, H, -H, H


class DiscreteShells(EnergyBackend):
    """Triangle membrane energy plus dihedral-angle hinge bending."""

    kind = "discreteShells"
    rigid_invariant = True

    def _bind(self, topology):
        n = topology.n_vertices
        F = topology.faces
        rows = np.arange(3 * len(F))
        Dm = sp.csr_matrix((np.ones(len(rows)), (rows, F.ravel())), shape=(len(rows), n))
        terms = [LocalTerm(Dm, 3, shells_membrane, np.ones(len(F)))]
        opp = topology.opposite
        hinges = []
        for a, b in topology.edges.tolist():
            c, d = opp.get((a, b)), opp.get((b, a))
            if c is not None and d is not None:
                hinges.append((a, b, c, d))
        if hinges:
            H = np.array(hinges).ravel()
            r = np.arange(len(H))
            Db = sp.csr_matrix((np.ones(len(H)), (r, H)), shape=(len(H), n))
            terms.append(LocalTerm(Db, 4, shells_hinge, np.ones(len(hinges))))
        return _TermEnergy(self, topology, terms)


class SubdivisionFEM(EnergyBackend):
    """Membrane and bending energy integrated over the Loop limit surface.

    The control mesh is refined once internally so that every patch carries
    at most one extraordinary vertex; the unknowns stay the caller's control
    points.
    """

    kind = "subdivisionFem"
    rigid_invariant = True

    def _bind(self, topology):
        fine, S, _ = loop.subdivision_matrix(topology)
        D = loop.jet_operator(fine, rows=(1, 2, 3, 4, 5))
        n_points = D.shape[0] // 5
        term = LocalTerm(D, 5, fem_point, np.full(n_points, loop.MID_EDGE_WEIGHT), S=S)
        return _TermEnergy(self, topology, [term])


BACKENDS = {cls.kind: cls for cls in (FlatQuadratic, DiscreteShells, SubdivisionFEM)}


def make_backend(kind, params=None, **kw):
    try:
        cls = BACKENDS[kind]
    except KeyError:
        raise ValueError(f"unknown backend {kind!r}; choose from {sorted(BACKENDS)}") from None
    return cls(params=params, **kw)


# -- shell-level helpers -----------------------------------------------------------

def _bound(backend, s, t):
    top = require_correspondence(s, t)
    return backend.bind(top), top


def eval_w(backend, s, t):
    """Deformation energy W[s, t]."""
    b, _ = _bound(backend, s, t)
    return b.energy(s.positions, t.positions)


def grad_w1(backend, s, t):
    b, top = _bound(backend, s, t)
    return Displacement(top, b.gradients(s.positions, t.positions)[1])


def grad_w2(backend, s, t):
    b, top = _bound(backend, s, t)
    return Displacement(top, b.gradients(s.positions, t.positions)[2])


def hess_w(backend, s, t, slots):
    """Second derivative block ``"11"``, ``"12"`` or ``"22"`` as a CSR matrix."""
    slots = str(slots)
    if slots not in ("11", "12", "22"):
        raise ValueError(f"slot pair must be 11, 12 or 22, got {slots!r}")
    b, _ = _bound(backend, s, t)
    d = b.derivatives(s.positions, t.positions)
    return {"11": d[3], "12": d[4], "22": d[5]}[slots]
