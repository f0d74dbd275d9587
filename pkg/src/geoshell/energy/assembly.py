"""Sparse assembly of energies that are sums of small local terms.

A term is described by a linear map ``D`` from (fine) control positions to the
``p`` local points of each of its ``E`` elements, optionally preceded by a
coarse-to-fine map ``S``, and a scalar local function
``f(xs (p, 3), xt (p, 3), weight, material) -> float`` written in JAX.  Value,
gradients and the three Hessian blocks of ``sum_e f`` follow by the chain rule
through the linear maps; local derivatives come from JAX automatic
differentiation of ``f``.
"""
from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp

from ..errors import InadmissibleStateError

jax.config.update("jax_enable_x64", True)

# Element counts are padded to a multiple of this so that meshes of similar
# size share one compiled kernel.
BUCKET = 512


def _kernels(f):
    def flat(z, w, mat, p):
        return f(z[: 3 * p].reshape(p, 3), z[3 * p:].reshape(p, 3), w, mat)

    def value(xs, xt, w, mat):
        return f(xs, xt, w, mat)

    def first(xs, xt, w, mat):
        p = xs.shape[0]
        z = jnp.concatenate([xs.ravel(), xt.ravel()])
        v, g = jax.value_and_grad(flat)(z, w, mat, p)
        return v, g

    def second(xs, xt, w, mat):
        p = xs.shape[0]
        z = jnp.concatenate([xs.ravel(), xt.ravel()])
        v, g = jax.value_and_grad(flat)(z, w, mat, p)
        H = jax.hessian(flat)(z, w, mat, p)
        return v, g, H

    axes = (0, 0, 0, None)
    return (jax.jit(jax.vmap(value, axes)), jax.jit(jax.vmap(first, axes)),
            jax.jit(jax.vmap(second, axes)))


_KERNEL_CACHE = {}


def kernels_for(f):
    if f not in _KERNEL_CACHE:
        _KERNEL_CACHE[f] = _kernels(f)
    return _KERNEL_CACHE[f]


def _kron3(A):
    return sp.kron(sp.csr_matrix(A), sp.identity(3, format="csr"), format="csr")


class LocalTerm:
    """One family of local elements sharing a kernel."""

    def __init__(self, D, p, f, weights, S=None):
        D = sp.csr_matrix(D)
        self.E = D.shape[0] // p
        if self.E * p != D.shape[0]:
            raise ValueError("row count of D is not a multiple of p")
        self.p = p
        self.f = f
        self.D = D
        self.S = None if S is None else sp.csr_matrix(S)
        w = np.asarray(weights, dtype=float)
        self.E_pad = max(BUCKET, -(-self.E // BUCKET) * BUCKET)
        self.weights = np.zeros(self.E_pad)
        self.weights[: self.E] = w
        self._D3 = _kron3(D)
        self._D3T = self._D3.T.tocsr()
        self._S3 = None if S is None else _kron3(self.S)
        self._S3T = None if S is None else self._S3.T.tocsr()
        q = 3 * p
        blk = np.arange(self.E)[:, None, None] * q
        self._rows = np.broadcast_to(blk + np.arange(q)[None, :, None], (self.E, q, q)).ravel()
        self._cols = np.broadcast_to(blk + np.arange(q)[None, None, :], (self.E, q, q)).ravel()

    def _local(self, x):
        y = x if self.S is None else self.S @ x
        loc = (self.D @ y).reshape(self.E, self.p, 3)
        if self.E_pad > self.E:
            pad = np.broadcast_to(loc[:1], (self.E_pad - self.E, self.p, 3))
            loc = np.concatenate([loc, pad])
        return loc

    def _pull(self, g_local):
        g = self._D3T @ g_local.ravel()
        if self.S is not None:
            g = self._S3T @ g
        return g

    def _pull2(self, H_local):
        B = sp.csr_matrix((H_local.ravel(), (self._rows, self._cols)),
                          shape=(3 * self.p * self.E,) * 2)
        H = self._D3T @ B @ self._D3
        if self.S is not None:
            H = self._S3T @ H @ self._S3
        return H

    def evaluate(self, xs, xt, mat, order):
        """Return value (order 0), plus gradients (1), plus Hessian blocks (2)."""
        ls, lt = self._local(xs), self._local(xt)
        k0, k1, k2 = kernels_for(self.f)
        args = (jnp.asarray(ls), jnp.asarray(lt), jnp.asarray(self.weights), jnp.asarray(mat))
        E, q = self.E, 3 * self.p
        if order == 0:
            v = np.asarray(k0(*args))[:E]
            return _checked_sum(v)
        if order == 1:
            v, g = k1(*args)
        else:
            v, g, H = k2(*args)
        v = _checked_sum(np.asarray(v)[:E])
        g = np.asarray(g)[:E]
        if not np.all(np.isfinite(g)):
            raise InadmissibleStateError("non-finite energy gradient")
        g1, g2 = self._pull(g[:, :q]), self._pull(g[:, q:])
        if order == 1:
            return v, g1, g2
        H = np.asarray(H)[:E]
        H11 = self._pull2(H[:, :q, :q])
        H12 = self._pull2(H[:, :q, q:])
        H22 = self._pull2(H[:, q:, q:])
        return v, g1, g2, H11, H12, H22


def _checked_sum(v):
    if not np.all(np.isfinite(v)):
        raise InadmissibleStateError("degenerate or inverted element")
    return float(np.sum(v))
