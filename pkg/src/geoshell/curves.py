"""Discrete Bézier curves, cubic Hermite curves and cardinal splines of shells."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .energy import EnergyBackend
from .errors import DomainError, NonConvergenceError
from .calculus import average_general, discrete_exp, discrete_log, geodesic, parallel_transport
from .mesh import require_correspondence
from .solver import SolverConfig

__all__ = ["BezierSpec", "bezier", "hermite", "hermite_controls", "CardinalSpec", "CardinalSpline",
           "cardinal_spline"]


def _annotate(exc, where):
    raise NonConvergenceError(f"{where}: {exc}", report=exc.report, partial=exc.partial,
                              stage=where) from exc


@dataclass(frozen=True)
class BezierSpec:
    controls: tuple
    K: int
    backend: EnergyBackend
    config: SolverConfig = SolverConfig()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        if len(self.controls) < 2:
            raise DomainError("a Bézier curve needs at least two control shells")
        require_correspondence(*self.controls)

    def __call__(self, t):
        return bezier(self, t)


def bezier(spec, t):
    """De Casteljau recursion with geodesic averaging at every node."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"Bézier parameter {t} outside [0, 1]")
    level = list(spec.controls)
    n = len(level) - 1
    for j in range(1, n + 1):
        nxt = []
        for i in range(j, n + 1):
            try:
                nxt.append(average_general(spec.backend, level[i - j], level[i - j + 1], t,
                                           spec.K, spec.config))
            except NonConvergenceError as exc:
                _annotate(exc, f"de Casteljau node (j={j}, i={i})")
        level = nxt
    return level[0]


def hermite_controls(backend, sA, xiA, xiB, sB, K, cfg=None):
    """The four Bézier controls of the discrete cubic Hermite curve."""
    cfg = cfg or SolverConfig()
    s1 = discrete_exp(backend, sA, xiA, 1.0 / 3.0, K, cfg)
    s2 = discrete_exp(backend, sB, -xiB, 1.0 / 3.0, K, cfg)
    return (sA, s1, s2, sB)


def hermite(backend, sA, xiA, xiB, sB, t, K, cfg=None):
    """Cubic Hermite curve from ``sA`` with velocity ``xiA`` to ``sB`` with velocity ``xiB``."""
    cfg = cfg or SolverConfig()
    controls = hermite_controls(backend, sA, xiA, xiB, sB, K, cfg)
    return bezier(BezierSpec(controls, K, backend, cfg), t)


@dataclass(frozen=True)
class CardinalSpec:
    keyframes: tuple
    kappa: float
    K: int
    backend: EnergyBackend
    config: SolverConfig = SolverConfig()

    def __post_init__(self):
        object.__setattr__(self, "keyframes", tuple(self.keyframes))
        if len(self.keyframes) < 3:
            raise DomainError("a cardinal spline needs at least three keyframes")
        if not 0.0 <= self.kappa <= 3.0:
            raise DomainError(f"tension {self.kappa} outside [0, 3]")
        if self.K < 2:
            raise DomainError("cardinal splines need K >= 2")
        require_correspondence(*self.keyframes)


class CardinalSpline:
    """Piecewise cubic discrete Bézier curve through the keyframes.

    The inner controls are computed on first use and shared by all
    evaluations.
    """

    def __init__(self, spec):
        self.spec = spec

    @property
    def m(self):
        return len(self.spec.keyframes) - 1

    @cached_property
    def controls(self):
        sp = self.spec
        s, m, c = sp.keyframes, self.m, sp.kappa / 3.0
        args = (sp.K, sp.config)
        d = [None] * (3 * m + 1)
        for j in range(m + 1):
            d[3 * j] = s[j]
        try:
            d[1] = discrete_exp(sp.backend, s[0], discrete_log(sp.backend, s[0], s[1], *args), c, *args)
            d[3 * m - 1] = discrete_exp(sp.backend, s[m],
                                        discrete_log(sp.backend, s[m], s[m - 1], *args), c, *args)
        except NonConvergenceError as exc:
            _annotate(exc, "cardinal spline boundary controls")
        for j in range(1, m):
            try:
                eta = discrete_log(sp.backend, s[j - 1], s[j + 1], *args)
                path = geodesic(sp.backend, s[j - 1], s[j], *args).path
                eta_p = parallel_transport(sp.backend, path, eta, sp.config)
                d[3 * j - 1] = discrete_exp(sp.backend, s[j], -eta_p, c, *args)
                d[3 * j + 1] = discrete_exp(sp.backend, s[j], eta_p, c, *args)
            except NonConvergenceError as exc:
                _annotate(exc, f"cardinal spline controls around keyframe {j}")
        return tuple(d)

    def segment(self, l):
        d = self.controls
        return BezierSpec(d[3 * l: 3 * l + 4], self.spec.K, self.spec.backend, self.spec.config)

    def __call__(self, t):
        t = float(t)
        if not 0.0 <= t <= self.m:
            raise DomainError(f"spline parameter {t} outside [0, {self.m}]")
        if t == int(t):
            return self.spec.keyframes[int(t)]
        l = min(math.floor(t), self.m - 1)
        try:
            return bezier(self.segment(l), t - l)
        except NonConvergenceError as exc:
            _annotate(exc, f"cardinal spline segment {l}")


def cardinal_spline(spec, t):
    return CardinalSpline(spec)(t)
