"""Interpolatory Riemannian subdivision of a polygon of shells.

Each scheme keeps the coarse shells and inserts new ones through chains of the
generalised interpolation ``I^K(a, b, t)``: geodesic averaging for ``t`` in
[0, 1] and discrete-Exp extrapolation otherwise.  In the Euclidean limit the
chains collapse to the classical linear masks (see :mod:`geoshell.oracle`).

Open polygons have no neighbours past their ends.  ``boundary="closed"``
wraps indices periodically; ``boundary="clampedEndpoints"`` repeats the first
and last shell as virtual neighbours.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

from .energy import EnergyBackend
from .errors import DomainError, NonConvergenceError
from .calculus import interpolation_extended
from .mesh import require_correspondence
from .solver import SolverConfig

__all__ = ["SCHEMES", "BOUNDARY_MODES", "SchemeSpec", "RefinedPolygon", "refine_binary4",
           "refine_binary6", "refine_ternary4", "refine", "subdivide_curve", "output_count"]

BOUNDARY_MODES = ("closed", "clampedEndpoints")

# Each rule produces the new shells between coarse shells k and k+1 from
# named intermediate shells.  Operands are ("s", offset) for coarse shell
# k + offset or ("d", j) for intermediate d_j; weights are exact rationals.
_RULES = {
    "binary4": {
        "factor": 2,
        "reach": (-1, 2),
        "d": [(("s", -1), ("s", 0), Fraction(9, 8)),
              (("s", 2), ("s", 1), Fraction(9, 8))],
        "new": [(("d", 0), ("d", 1), Fraction(1, 2))],
    },
    "binary6": {
        "factor": 2,
        "reach": (-2, 3),
        "d": [(("s", -2), ("s", -1), Fraction(25, 22)),
              (("s", 3), ("s", 2), Fraction(25, 22)),
              (("d", 0), ("s", 0), Fraction(75, 64)),
              (("d", 1), ("s", 1), Fraction(75, 64))],
        "new": [(("d", 2), ("d", 3), Fraction(1, 2))],
    },
    "ternary4": {
        "factor": 3,
        "reach": (-1, 2),
        "d": [(("s", -1), ("s", 0), Fraction(76, 69)),
              (("s", 1), ("s", 2), Fraction(-2, 15)),
              (("s", 2), ("s", 1), Fraction(76, 69)),
              (("s", 0), ("s", -1), Fraction(-2, 15))],
        "new": [(("d", 0), ("d", 1), Fraction(10, 33)),
                (("d", 2), ("d", 3), Fraction(10, 33))],
    },
}
SCHEMES = tuple(_RULES)


def scheme_rule(name):
    try:
        return _RULES[name]
    except KeyError:
        raise DomainError(f"unknown scheme {name!r}; choose from {SCHEMES}") from None


@dataclass
class RefinedPolygon:
    """Shells of one refinement level.

    ``provenance`` has one entry per inserted shell: its index, the coarse
    stencil indices it depends on and the intermediate d-shells used.
    """

    level: int
    shells: tuple
    closed: bool
    provenance: list = field(default_factory=list)

    def __len__(self):
        return len(self.shells)


@dataclass(frozen=True)
class SchemeSpec:
    scheme: str
    controls: tuple
    levels: int = 3
    boundary: str = "clampedEndpoints"
    K: int = 4
    backend: EnergyBackend = None
    config: SolverConfig = SolverConfig()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        scheme_rule(self.scheme)
        if self.boundary not in BOUNDARY_MODES:
            raise DomainError(f"unknown boundary mode {self.boundary!r}; choose from {BOUNDARY_MODES}")
        if len(self.controls) < 3:
            raise DomainError("subdivision needs at least three control shells (n >= 2)")
        if self.scheme == "binary6" and self.boundary != "closed" and len(self.controls) < 6:
            raise DomainError("binary6 on an open polygon needs at least six control shells")
        if self.levels < 0:
            raise DomainError("levels must be non-negative")
        if self.backend is None:
            raise DomainError("a subdivision spec needs an energy backend")
        require_correspondence(*self.controls)


def output_count(scheme, n_shells, closed):
    f = scheme_rule(scheme)["factor"]
    return f * n_shells if closed else f * (n_shells - 1) + 1


def refine(polygon, scheme, backend, K, cfg=None):
    """One level of ``scheme`` applied to ``polygon`` (a :class:`RefinedPolygon`)."""
    rule = scheme_rule(scheme)
    cfg = cfg or SolverConfig()
    s = polygon.shells
    N = len(s)
    level = polygon.level + 1
    factor = rule["factor"]

    def coarse(i):
        if polygon.closed:
            return i % N
        return min(max(i, 0), N - 1)

    def I(a, b, t, where):
        try:
            return interpolation_extended(backend, a, b, float(t), K, cfg)
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"level {level}, {where}: {exc}", report=exc.report,
                                      partial=exc.partial, stage=f"level {level}, {where}") from exc

    out, prov = [], []
    n_intervals = N if polygon.closed else N - 1
    for k in range(N):
        out.append(s[k])
        if k >= n_intervals:
            continue
        lo, hi = rule["reach"]
        stencil = [coarse(k + o) for o in range(lo, hi + 1)]
        d = []

        def operand(op):
            kind, j = op
            return s[coarse(k + j)] if kind == "s" else d[j]

        for j, (a, b, t) in enumerate(rule["d"]):
            d.append(I(operand(a), operand(b), t, f"k={k}, d_{j}"))
        for j, (a, b, t) in enumerate(rule["new"]):
            out.append(I(operand(a), operand(b), t, f"k={k}, new shell {j + 1}"))
            prov.append({"index": factor * k + j + 1, "stencil": stencil,
                         "d": [f"d_{len(rule['d']) * k + i}" for i in range(len(rule["d"]))]})
    return RefinedPolygon(level, tuple(out), polygon.closed, prov)


def refine_binary4(polygon, backend, K, cfg=None):
    return refine(polygon, "binary4", backend, K, cfg)


def refine_binary6(polygon, backend, K, cfg=None):
    return refine(polygon, "binary6", backend, K, cfg)


def refine_ternary4(polygon, backend, K, cfg=None):
    return refine(polygon, "ternary4", backend, K, cfg)


def subdivide_curve(spec):
    """All levels ``0..L`` of the subdivision defined by ``spec``."""
    if spec.levels > 5:
        warnings.warn(f"{spec.levels} subdivision levels can take hours on physical backends",
                      stacklevel=2)
    poly = RefinedPolygon(0, spec.controls, spec.boundary == "closed")
    out = [poly]
    for _ in range(spec.levels):
        poly = refine(poly, spec.scheme, spec.backend, spec.K, spec.config)
        out.append(poly)
    return out
