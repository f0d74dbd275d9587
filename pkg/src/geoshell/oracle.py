"""Closed-form Euclidean references and finite-difference derivative checks.

With the ``flatQuadratic`` backend every geodesic operation is affine, so the
curves and schemes of this package must agree with the textbook constructions
collected here.  The scheme masks are derived by exact rational composition of
the affine interpolations ``(1 - t) a + t b``. They are written out
independently of :mod:`geoshell.subdivision` so the two can be checked
against each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

__all__ = ["LinearMask", "expand_scheme_to_mask", "linear_refine", "bernstein", "bezier_points",
           "hermite_points", "catmull_rom", "cardinal_points", "fd_gradient", "fd_hessian_action"]


@dataclass(frozen=True)
class LinearMask:
    """Rational weights on coarse points ``k + offset, k + offset + 1, ...``."""

    coefficients: tuple
    offset: int

    def __post_init__(self):
        if sum(self.coefficients) != 1:
            raise ValueError("mask weights must sum to one")

    def as_floats(self):
        return np.array([float(c) for c in self.coefficients])


def _lerp(a, b, t):
    t = Fraction(t)
    out = {}
    for src, w in ((a, 1 - t), (b, t)):
        for i, c in src.items():
            out[i] = out.get(i, 0) + w * c
    return out


def _mask(combo):
    lo, hi = min(combo), max(combo)
    return LinearMask(tuple(combo.get(i, Fraction(0)) for i in range(lo, hi + 1)), lo)


def expand_scheme_to_mask(scheme):
    """Masks of the inserted points of one refinement step, in output order.

    Offsets are relative to the coarse index ``k`` of the interval the points
    are inserted into.
    """
    s = {i: {i: Fraction(1)} for i in range(-3, 5)}
    if scheme == "binary4":
        d0 = _lerp(s[-1], s[0], Fraction(9, 8))
        d1 = _lerp(s[2], s[1], Fraction(9, 8))
        return (_mask(_lerp(d0, d1, Fraction(1, 2))),)
    if scheme == "binary6":
        d0 = _lerp(s[-2], s[-1], Fraction(25, 22))
        d1 = _lerp(s[3], s[2], Fraction(25, 22))
        d2 = _lerp(d0, s[0], Fraction(75, 64))
        d3 = _lerp(d1, s[1], Fraction(75, 64))
        return (_mask(_lerp(d2, d3, Fraction(1, 2))),)
    if scheme == "ternary4":
        d0 = _lerp(s[-1], s[0], Fraction(76, 69))
        d1 = _lerp(s[1], s[2], Fraction(-2, 15))
        d2 = _lerp(s[2], s[1], Fraction(76, 69))
        d3 = _lerp(s[0], s[-1], Fraction(-2, 15))
        return (_mask(_lerp(d0, d1, Fraction(10, 33))), _mask(_lerp(d2, d3, Fraction(10, 33))))
    raise ValueError(f"unknown scheme {scheme!r}")


def linear_refine(points, scheme, closed, levels=1):
    """Apply the linear masks of ``scheme`` to an array of points ``(N, ...)``."""
    masks = [(m.as_floats(), m.offset) for m in expand_scheme_to_mask(scheme)]
    factor = 3 if scheme == "ternary4" else 2
    p = np.asarray(points, dtype=float)
    for _ in range(levels):
        N = len(p)

        def at(i):
            return p[i % N] if closed else p[min(max(i, 0), N - 1)]

        out = []
        for k in range(N):
            out.append(p[k])
            if not closed and k == N - 1:
                continue
            for w, off in masks:
                out.append(sum(wi * at(k + off + i) for i, wi in enumerate(w)))
        p = np.array(out)
        assert len(p) == (factor * N if closed else factor * (N - 1) + 1)
    return p


def bernstein(n, i, t):
    return comb(n, i) * t ** i * (1 - t) ** (n - i)


def bezier_points(controls, t):
    """Euclidean Bézier curve through the Bernstein basis."""
    c = np.asarray(controls, dtype=float)
    n = len(c) - 1
    return sum(bernstein(n, i, t) * c[i] for i in range(n + 1))


def hermite_points(a, va, vb, b, t):
    """Classical cubic Hermite interpolation."""
    h00 = 2 * t ** 3 - 3 * t ** 2 + 1
    h10 = t ** 3 - 2 * t ** 2 + t
    h01 = -2 * t ** 3 + 3 * t ** 2
    h11 = t ** 3 - t ** 2
    return h00 * a + h10 * va + h01 * b + h11 * vb


def cardinal_points(keys, kappa, t):
    """Euclidean cardinal spline in Bézier form.

    Inner tangents are ``kappa (p_{j+1} - p_{j-1})``; the end tangents are
    ``kappa (p_1 - p_0)`` and ``kappa (p_m - p_{m-1})``.
    """
    p = np.asarray(keys, dtype=float)
    m = len(p) - 1
    c = kappa / 3.0
    d = [None] * (3 * m + 1)
    for j in range(m + 1):
        d[3 * j] = p[j]
    d[1] = p[0] + c * (p[1] - p[0])
    d[3 * m - 1] = p[m] + c * (p[m - 1] - p[m])
    for j in range(1, m):
        d[3 * j - 1] = p[j] - c * (p[j + 1] - p[j - 1])
        d[3 * j + 1] = p[j] + c * (p[j + 1] - p[j - 1])
    l = min(int(np.floor(t)), m - 1)
    return bezier_points(d[3 * l: 3 * l + 4], t - l)


def catmull_rom(p0, p1, p2, p3, u):
    """Uniform Catmull-Rom segment between ``p1`` and ``p2`` in its polynomial form."""
    return 0.5 * ((2 * p1) + (-p0 + p2) * u + (2 * p0 - 5 * p1 + 4 * p2 - p3) * u ** 2
                  + (-p0 + 3 * p1 - 3 * p2 + p3) * u ** 3)


def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient; ``h`` is relative to ``1 + |x_i|``."""
    x = np.array(x, dtype=float)
    g = np.empty(x.size)
    flat = x.ravel()
    for i in range(flat.size):
        hi = h * (1.0 + abs(flat[i]))
        e = np.zeros_like(flat)
        e[i] = hi
        g[i] = (f((flat + e).reshape(x.shape)) - f((flat - e).reshape(x.shape))) / (2 * hi)
    return g.reshape(x.shape)


def fd_hessian_action(grad, x, v, h=1e-6):
    """Central difference of ``grad`` along ``v``: approximates ``H(x) v``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    scale = h * (1.0 + np.abs(x).max()) / max(np.abs(v).max(), 1e-300)
    return (np.asarray(grad(x + scale * v)) - np.asarray(grad(x - scale * v))) / (2 * scale)
