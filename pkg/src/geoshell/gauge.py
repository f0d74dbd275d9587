"""Rigid-motion gauge for energies that ignore rigid motions of each argument.

Physical deformation energies satisfy ``W[s, R t + b] = W[s, t]`` and
``W[R s + b, t] = W[s, t]``, so minimisers over a free shell are only defined up to a
rigid motion.  The gauge used throughout the package is

    C_x (m - x) = 0,     m = alpha * left + (1 - alpha) * right,

where ``x`` is the free shell, ``left``/``right`` its neighbours on a path and
``C_x`` the six rows of :func:`~geoshell.solver.rigid_constraints` taken about
``x``.  For geodesic paths (``alpha = 1/2``) this says the discrete acceleration
carries no net translation and no net angular momentum.  The rule is reversal
symmetric and rigidly equivariant, and shooting (Exp) imposes exactly the
same condition, so discrete Log and Exp invert each other.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import root
from scipy.spatial.transform import Rotation

from .errors import SolverError
from .solver import rigid_constraints


def gauge_residual(x, left, right, alpha):
    m = alpha * left + (1.0 - alpha) * right
    return rigid_constraints(x) @ (m - x).ravel()


def _move(x, p):
    c = x.mean(axis=0)
    return (x - c) @ Rotation.from_rotvec(p[:3]).as_matrix().T + c + p[3:]


def fix_gauge(shells, rules, tol=1e-13):
    """Rigidly move the free shells of ``shells`` until every gauge rule holds.

    ``rules`` lists ``(k, left, right, alpha)``: shell ``k`` is free and is
    gauged against shells ``left`` and ``right`` (indices into ``shells``).
    Shells not named as ``k`` are fixed.  Returns a new list of arrays.
    """
    shells = [np.asarray(s, dtype=float) for s in shells]
    if not rules:
        return shells
    free = [r[0] for r in rules]
    scale = max(np.ptp(np.concatenate(shells), axis=0).max(), 1e-300)

    def apply(z):
        out = list(shells)
        for i, k in enumerate(free):
            p = z[6 * i: 6 * i + 6].copy()
            p[3:] *= scale
            out[k] = _move(shells[k], p)
        return out

    def fun(z):
        cur = apply(z)
        return np.concatenate([gauge_residual(cur[k], cur[a], cur[b], al)
                               for k, a, b, al in rules])

    sol = root(fun, np.zeros(6 * len(free)), method="hybr", options={"xtol": tol})
    res = np.abs(fun(sol.x)).max()
    if res > 1e-10 * scale:
        raise SolverError(f"rigid gauge could not be imposed (residual {res:.2e})")
    return apply(sol.x)
