"""A discrete geodesic between two bendings of a small bar.

Both elastic backends are used.  The script reports how far the coupled
Newton phase lowers the path energy below the sequential initialisation, the
Euler-Lagrange residual of the result and the per-step energies (roughly
equal along a geodesic).  Frames go to ``demo_out/bar_<backend>/``.

    python demos/bar_geodesic.py [K]
"""
import os
import sys

import numpy as np

from geoshell import shapes
from geoshell.calculus import el_residual, geodesic
from geoshell.energy import DiscreteShells, SubdivisionFEM
from geoshell.mesh import write_frames

K = int(sys.argv[1]) if len(sys.argv) > 1 else 6
a, b = shapes.bent_bar(0.0), shapes.bent_bar(1.5)

for backend in (DiscreteShells(), SubdivisionFEM()):
    name = backend.kind
    res = geodesic(backend, a, b, K)
    print(f"{name}: path energy {res.energy:.6e} (initialisation {res.init_energy:.6e}), "
          f"{len(res.report.step_norms)} coupled Newton solves")
    print("  EL residual   ", float(np.abs(el_residual(backend, res.path)).max()))
    print("  step energies ", " ".join(f"{w:.3e}" for w in res.step_energies))
    out = os.path.join("demo_out", f"bar_{name}")
    write_frames(out, res.path)
    print("  frames in", out)
