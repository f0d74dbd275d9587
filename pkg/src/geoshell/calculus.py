"""Discrete geodesic calculus: path energy, geodesics, averages, Log, Exp and transport.

All operations take an :class:`~geoshell.energy.EnergyBackend` and work for
any of the three energies.  For the Euclidean ``flatQuadratic`` backend every
operation reduces to its affine counterpart, which is how the test-suite
checks them.

For rigidly invariant backends each free shell is pinned by the gauge of
:mod:`geoshell.gauge`.  Inside Newton iterations the gauge acts as a linear
constraint on the update; afterwards it is imposed exactly by rigid motions,
which change neither energies nor the Euler-Lagrange conditions.
"""
from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .energy import EnergyBackend
from .errors import DomainError, NonConvergenceError
from .gauge import fix_gauge
from .mesh import DiscretePath, Displacement, Shell, require_correspondence
from .solver import SolveReport, SolverConfig, newton_minimize, newton_root_find, rigid_constraints

__all__ = [
    "GeodesicProblem", "GeodesicResult", "TransportProblem", "path_energy", "geodesic",
    "average", "average_general", "discrete_log", "discrete_exp", "exp_path",
    "parallel_transport", "interpolation_extended", "el_residual",
]


class _Context:
    """Backend bound to a topology plus solver settings."""

    def __init__(self, backend, topology, cfg):
        self.backend = backend
        self.topology = topology
        self.cfg = cfg or SolverConfig()
        self.bound = backend.bind(topology)
        self.rigid = backend.rigid_invariant and self.cfg.rigid_handling == "constraints"
        self.shape = (topology.n_vertices, 3)

    def W(self, a, b):
        return self.bound.energy(a, b)

    def gauge(self, x):
        return rigid_constraints(x.reshape(self.shape)) if self.rigid else None

    def fix(self, shells, rules):
        return fix_gauge(shells, rules) if self.rigid else list(shells)

    def finish(self, x, report, stage):
        if not report.converged:
            raise NonConvergenceError(
                f"{stage}: no convergence after {report.iterations} Newton steps "
                f"(step norm^2 {report.final_step_norm_squared:.3g})",
                report=report, partial=x.reshape(self.shape), stage=stage)
        return x.reshape(self.shape)


def _context(backend, shells, cfg):
    if not isinstance(backend, EnergyBackend):
        raise TypeError(f"expected an EnergyBackend, got {type(backend).__name__}")
    top = require_correspondence(*shells)
    return _Context(backend, top, cfg)


# -- building blocks on position arrays ---------------------------------------------

def _two_point(ctx, xa, xb, wa, wb, x0, stage):
    """argmin_s wa W[xa, s] + wb W[s, xb], started at ``x0``."""
    shape = ctx.shape

    def value(z):
        s = z.reshape(shape)
        return wa * ctx.W(xa, s) + wb * ctx.W(s, xb)

    def derivatives(z):
        s = z.reshape(shape)
        va, _, ga, _, _, Ha = ctx.bound.derivatives(xa, s)
        vb, gb, _, Hb, _, _ = ctx.bound.derivatives(s, xb)
        return wa * va + wb * vb, (wa * ga + wb * gb).ravel(), wa * Ha + wb * Hb

    x, rep = newton_minimize(value, derivatives, x0.ravel(), ctx.cfg, ctx.gauge if ctx.rigid else None)
    return ctx.finish(x, rep, stage), rep


def _path_newton(ctx, shells):
    """Coupled Newton minimisation of the path energy over the interior shells."""
    K = len(shells) - 1
    shape, n3 = ctx.shape, 3 * ctx.shape[0]
    xA, xB = shells[0], shells[-1]

    def unpack(z):
        return [xA] + [z[i * n3:(i + 1) * n3].reshape(shape) for i in range(K - 1)] + [xB]

    def value(z):
        x = unpack(z)
        return K * sum(ctx.W(x[k - 1], x[k]) for k in range(1, K + 1))

    def derivatives(z):
        x = unpack(z)
        f = 0.0
        g = np.zeros((K - 1, n3))
        diag = [None] * (K - 1)
        off = [None] * (K - 2)
        for k in range(1, K + 1):
            v, g1, g2, H11, H12, H22 = ctx.bound.derivatives(x[k - 1], x[k])
            f += v
            if k - 1 >= 1:                      # left shell is unknown k-1
                g[k - 2] += g1.ravel()
                diag[k - 2] = H11 if diag[k - 2] is None else diag[k - 2] + H11
            if k <= K - 1:                      # right shell is unknown k
                g[k - 1] += g2.ravel()
                diag[k - 1] = H22 if diag[k - 1] is None else diag[k - 1] + H22
            if 2 <= k <= K - 1:
                off[k - 2] = H12
        blocks = [[None] * (K - 1) for _ in range(K - 1)]
        for i in range(K - 1):
            blocks[i][i] = diag[i]
        for i in range(K - 2):
            blocks[i][i + 1] = off[i]
            blocks[i + 1][i] = off[i].T
        H = sp.bmat(blocks, format="csr") if K > 2 else sp.csr_matrix(diag[0])
        return K * f, K * g.ravel(), K * H

    def constraints(z):
        x = unpack(z)
        return sp.block_diag([rigid_constraints(x[k]) for k in range(1, K)], format="csr")

    z0 = np.concatenate([s.ravel() for s in shells[1:-1]])
    z, rep = newton_minimize(value, derivatives, z0, ctx.cfg, constraints if ctx.rigid else None)
    if not rep.converged:
        raise NonConvergenceError(
            f"geodesic: coupled Newton did not converge in {rep.iterations} steps",
            report=rep, partial=unpack(z), stage="geodesic")
    return unpack(z), rep


def _geodesic_rules(K):
    return [(k, k - 1, k + 1, 0.5) for k in range(1, K)]


@dataclass
class GeodesicResult:
    """A discrete geodesic with its solver statistics.

    ``init_energy`` is the path energy after the sequential initialisation,
    ``energy`` the path energy of the final geodesic.
    """

    path: DiscretePath
    report: SolveReport
    init_report: SolveReport
    energy: float
    init_energy: float
    step_energies: list = field(default_factory=list)


def _geodesic_arrays(ctx, xA, xB, K):
    if K == 1:
        e = ctx.W(xA, xB)
        rep = SolveReport(converged=True, final_step_norm_squared=0.0, final_residual_norm=0.0)
        return [xA, xB], rep, rep, e, e
    # Phase 1: shell k minimises (K-k) W[sA, s] + k W[s, sB], started from shell k-1.
    shells = [xA]
    init_reports = []
    for k in range(1, K):
        x, rep = _two_point(ctx, xA, xB, float(K - k), float(k), shells[-1],
                            stage=f"geodesic initialisation, shell {k}")
        shells.append(x)
        init_reports.append(rep)
    shells.append(xB)
    init_energy = K * sum(ctx.W(shells[k - 1], shells[k]) for k in range(1, K + 1))
    # Phase 2: coupled minimisation of the full path energy.
    shells, rep = _path_newton(ctx, shells)
    shells = ctx.fix(shells, _geodesic_rules(K))
    energy = K * sum(ctx.W(shells[k - 1], shells[k]) for k in range(1, K + 1))
    return shells, rep, SolveReport.merge(init_reports), energy, init_energy


def _digest(x):
    return hashlib.sha1(np.ascontiguousarray(x, dtype=float).tobytes()).hexdigest()


_CACHE_LOCK = threading.Lock()


def _cached_geodesic(ctx, xA, xB, K):
    cache = ctx.backend.__dict__.setdefault("_geodesic_cache", {})
    key = (ctx.topology.key, _digest(xA), _digest(xB), int(K), ctx.cfg)
    with _CACHE_LOCK:
        hit = cache.get(key)
    if hit is None:
        hit = _geodesic_arrays(ctx, xA, xB, K)
        with _CACHE_LOCK:
            cache.setdefault(key, hit)
    return hit


def _shoot(ctx, x_prev, x_cur, tau=1.0):
    """Next shell of a discrete geodesic through ``x_prev, x_cur``, or the fraction ``tau`` of it."""
    a, b = x_prev, x_cur
    g_ab = ctx.bound.gradients(a, b)[2].ravel()
    wa, wb = tau / (1.0 + tau), 1.0 / (1.0 + tau)
    p = b + tau * (b - a)

    def residual(z):
        s = z.reshape(ctx.shape)
        _, g1, _, _, H12, _ = ctx.bound.derivatives(b, s)
        return wa * g_ab + wb * g1.ravel(), wb * H12

    constraints = None
    if ctx.rigid:
        C = rigid_constraints(b)

        def constraints(z):
            return C, C @ (z - p.ravel())

    x, rep = newton_root_find(residual, p.ravel(), ctx.cfg, constraints)
    return x, rep


def _steps(t, K):
    """Split ``t K`` into an integer part and a fractional remainder."""
    tk = t * K
    k = math.floor(tk + 1e-12 * max(1.0, abs(tk)))
    tau = tk - k
    if tau < 1e-12:
        tau = 0.0
    return k, tau


def _exp_arrays(ctx, x0, xi, t, K):
    if t < 0:
        raise DomainError(f"discrete Exp needs t >= 0, got {t}")
    x1 = x0 + xi / K
    k, tau = _steps(t, K)
    shells = [x0, x1]
    if k == 0 and tau == 0.0:
        return shells[:1], x0
    if k == 0:
        # Only the first step is partially used: weighted average of s0 and s1.
        x, _ = _two_point(ctx, x0, x1, 1.0 - tau, tau, x0 + tau * (x1 - x0), "exp, fractional step 0")
        x = ctx.fix([x0, x, x1], [(1, 0, 2, 1.0 - tau)])[1]
        return shells, x
    for j in range(1, k):
        x, rep = _shoot(ctx, shells[j - 1], shells[j])
        shells.append(ctx.finish(x, rep, f"exp, step {j + 1}"))
    if tau == 0.0:
        return shells, shells[k]
    x, rep = _shoot(ctx, shells[k - 1], shells[k], tau)
    return shells, ctx.finish(x, rep, f"exp, fractional step {k + 1}")


def _average_general_arrays(ctx, xA, xB, t, K):
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"averaging parameter {t} outside [0, 1]")
    if t == 0.0:
        return xA
    if t == 1.0:
        return xB
    shells = _cached_geodesic(ctx, xA, xB, K)[0]
    j, tau = _steps(t, K)
    if tau == 0.0:
        return shells[j]
    a, b = shells[j], shells[j + 1]
    x, _ = _two_point(ctx, a, b, 1.0 - tau, tau, a + tau * (b - a),
                      f"average, between shells {j} and {j + 1}")
    return ctx.fix([a, x, b], [(1, 0, 2, 1.0 - tau)])[1]


def _log_arrays(ctx, xA, xB, K):
    shells = _cached_geodesic(ctx, xA, xB, K)[0]
    return K * (shells[1] - shells[0])


def _transport_arrays(ctx, shells, eta):
    K = len(shells) - 1
    if not np.any(eta):
        return np.zeros_like(eta)
    for k in range(1, K + 1):
        prev, cur = shells[k - 1], shells[k]
        sp_prev = prev + eta / K
        mid, _ = _two_point(ctx, sp_prev, cur, 0.5, 0.5, 0.5 * (sp_prev + cur),
                            f"transport, rung {k}: midpoint")
        mid = ctx.fix([sp_prev, mid, cur], [(1, 0, 2, 0.5)])[1]
        x, rep = _shoot(ctx, prev, mid)
        sp_k = ctx.finish(x, rep, f"transport, rung {k}: reflection")
        eta = K * (sp_k - cur)
    return eta


# -- public API ----------------------------------------------------------------------

def path_energy(backend, path):
    """K times the sum of W over consecutive shells."""
    shells = list(path)
    top = require_correspondence(*shells)
    b = backend.bind(top)
    K = len(shells) - 1
    return K * sum(b.energy(shells[k - 1].positions, shells[k].positions) for k in range(1, K + 1))


def el_residual(backend, path):
    """Per interior shell Euler-Lagrange residual ``W_2[s_{k-1}, s_k] + W_1[s_k, s_{k+1}]``."""
    shells = [s.positions for s in path]
    b = backend.bind(path.topology)
    out = []
    for k in range(1, len(shells) - 1):
        g2 = b.gradients(shells[k - 1], shells[k])[2]
        g1 = b.gradients(shells[k], shells[k + 1])[1]
        out.append(g2 + g1)
    return np.array(out)


def geodesic(backend, sA, sB, K, cfg=None):
    """Discrete geodesic of ``K`` steps between ``sA`` and ``sB``.

    Computed in two phases: a sequential initialisation of each interior
    shell, then a coupled Newton solve of the full Euler-Lagrange system.
    """
    if K < 1:
        raise DomainError("K must be at least 1")
    ctx = _context(backend, (sA, sB), cfg)
    shells, rep, init_rep, energy, init_energy = _cached_geodesic(ctx, sA.positions, sB.positions, K)
    path = DiscretePath(tuple(Shell(ctx.topology, x, check=False) for x in shells))
    w = [ctx.W(shells[k - 1], shells[k]) for k in range(1, K + 1)]
    return GeodesicResult(path, rep, init_rep, energy, init_energy, w)


@dataclass(frozen=True)
class GeodesicProblem:
    backend: EnergyBackend
    sA: Shell
    sB: Shell
    K: int
    config: SolverConfig = SolverConfig()

    def solve(self):
        return geodesic(self.backend, self.sA, self.sB, self.K, self.config)


def average(backend, sA, sB, t, K, cfg=None):
    """Shell ``k = tK`` of the discrete geodesic; ``t K`` must be an integer."""
    k = round(t * K)
    if abs(t * K - k) > 1e-9 or not 0 <= k <= K:
        raise DomainError(f"t = {t} is not a multiple of 1/{K} in [0, 1]")
    if k == 0:
        return sA
    if k == K:
        return sB
    return geodesic(backend, sA, sB, K, cfg).path[k]


def average_general(backend, sA, sB, t, K, cfg=None):
    """Geodesic interpolation at any ``t`` in [0, 1].

    Between the bracketing geodesic shells ``s_j, s_{j+1}`` the result
    minimises ``(1 - tau) W[s_j, s] + tau W[s, s_{j+1}]`` with ``tau = tK - j``.
    """
    ctx = _context(backend, (sA, sB), cfg)
    if t == 0.0:
        return sA
    if t == 1.0:
        return sB
    x = _average_general_arrays(ctx, sA.positions, sB.positions, float(t), K)
    return Shell(ctx.topology, x, check=False)


def discrete_log(backend, sA, sB, K, cfg=None):
    """K times the first step of the discrete geodesic from ``sA`` to ``sB``."""
    ctx = _context(backend, (sA, sB), cfg)
    return Displacement(ctx.topology, _log_arrays(ctx, sA.positions, sB.positions, K))


def exp_path(backend, sA, xi, t, K, cfg=None):
    """Shells ``s_0, s_1, ...`` shot along ``xi`` plus the shell at time ``t``."""
    if xi.topology != sA.topology:
        raise DomainError("displacement and shell live on different meshes")
    ctx = _context(backend, (sA,), cfg)
    shells, x = _exp_arrays(ctx, sA.positions, xi.values, float(t), K)
    return ([Shell(ctx.topology, s, check=False) for s in shells],
            Shell(ctx.topology, x, check=False))


def discrete_exp(backend, sA, xi, t, K, cfg=None):
    """Discrete exponential map: shoot from ``sA`` with first step ``xi / K`` up to time ``t``."""
    return exp_path(backend, sA, xi, t, K, cfg)[1]


def parallel_transport(backend, path, eta, cfg=None):
    """Schild's-ladder transport of ``eta`` from the first to the last shell of ``path``.

    Each rung takes a geodesic midpoint and reflects the previous shell
    through it with one shooting step.
    """
    shells = list(path)
    ctx = _context(backend, shells, cfg)
    if eta.topology != ctx.topology:
        raise DomainError("displacement and path live on different meshes")
    out = _transport_arrays(ctx, [s.positions for s in shells], eta.values)
    return Displacement(ctx.topology, out)


@dataclass(frozen=True)
class TransportProblem:
    path: DiscretePath
    eta0: Displacement
    backend: EnergyBackend
    config: SolverConfig = SolverConfig()

    def solve(self):
        return parallel_transport(self.backend, self.path, self.eta0, self.config)


def interpolation_extended(backend, sA, sB, t, K, cfg=None):
    """Averaging on [0, 1], extrapolation by the discrete Exp outside of it."""
    t = float(t)
    if 0.0 <= t <= 1.0:
        return average_general(backend, sA, sB, t, K, cfg)
    if t < 0.0:
        xi = discrete_log(backend, sA, sB, K, cfg)
        return discrete_exp(backend, sA, -xi, -t, K, cfg)
    xi = discrete_log(backend, sB, sA, K, cfg)
    return discrete_exp(backend, sB, -xi, t - 1.0, K, cfg)
