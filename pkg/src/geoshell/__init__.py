"""Discrete geodesic calculus on a shape space of elastic shells.

Geodesics, Log/Exp, parallel transport, Bézier and cardinal spline curves and
interpolatory subdivision schemes for triangle-mesh shells.  The main entry points
are re-exported here.
"""
__version__ = "0.1.0"

from .curves import BezierSpec, CardinalSpec, CardinalSpline, bezier, hermite, hermite_controls
from .energy import (DiscreteShells, FlatQuadratic, MaterialParams, SubdivisionFEM, eval_w,
                     grad_w1, grad_w2, hess_w, make_backend)
from .errors import (CorrespondenceError, DomainError, GeoShellError, InadmissibleStateError,
                     NonConvergenceError, ObjParseError, SolverError, UnsupportedMeshError)
from .calculus import (GeodesicProblem, TransportProblem, average, average_general, discrete_exp,
                       discrete_log, el_residual, exp_path, geodesic, interpolation_extended,
                       parallel_transport, path_energy)
from .mesh import (DiscretePath, Displacement, Shell, Topology, check_correspondence, load_obj,
                   read_obj, save_obj, write_obj)
from .solver import SolverConfig, SolveReport
from .subdivision import SchemeSpec, subdivide_curve
