"""With the flat quadratic energy every construction collapses to its Euclidean
counterpart.  This script runs each one on a random 50-vertex mesh and prints
the distance to the textbook formula, which should sit at round-off level.

    python demos/flat_tour.py
"""
import numpy as np

from geoshell import shapes
from geoshell.calculus import discrete_exp, discrete_log, geodesic, parallel_transport
from geoshell.curves import BezierSpec, CardinalSpec, CardinalSpline, bezier
from geoshell.energy import FlatQuadratic
from geoshell.mesh import Shell
from geoshell.oracle import bezier_points, cardinal_points, linear_refine
from geoshell.subdivision import SCHEMES, SchemeSpec, subdivide_curve

rng = np.random.default_rng(0)
base = shapes.tube(n_around=6, n_rings=8)
keys = [Shell(base.topology, base.positions + 0.3 * rng.normal(size=base.positions.shape))
        for _ in range(5)]
P = np.array([k.positions for k in keys])
flat = FlatQuadratic()

path = geodesic(flat, keys[0], keys[1], 6).path
line = [(1 - k / 6) * P[0] + k / 6 * P[1] for k in range(7)]
print("geodesic vs straight line      ", max(np.abs(s.positions - l).max() for s, l in zip(path, line)))

xi = discrete_log(flat, keys[0], keys[1], 4)
print("Log vs difference              ", np.abs(xi.values - (P[1] - P[0])).max())
print("Exp(1.5) vs extrapolation      ",
      np.abs(discrete_exp(flat, keys[0], xi, 1.5, 4).positions - (P[0] + 1.5 * (P[1] - P[0]))).max())
print("transport vs identity          ", np.abs(parallel_transport(flat, path, xi).values - xi.values).max())

spec = BezierSpec(keys[:4], 3, flat)
print("de Casteljau vs Bernstein      ", np.abs(bezier(spec, 0.3).positions - bezier_points(P[:4], 0.3)).max())

spline = CardinalSpline(CardinalSpec(keys, 0.5, 2, flat))
print("cardinal vs Catmull-Rom form   ", np.abs(spline(2.4).positions - cardinal_points(P, 0.5, 2.4)).max())

for scheme in SCHEMES:
    out = subdivide_curve(SchemeSpec(scheme, keys, 2, "closed", 2, flat))[-1]
    ref = linear_refine(P, scheme, True, 2)
    err = np.abs(np.array([s.positions for s in out.shells]) - ref).max()
    print(f"{scheme:9s} vs linear mask       ", err)
