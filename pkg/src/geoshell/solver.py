"""Damped Newton methods with optional linear equality constraints on the update.

Both solvers stop once the squared Euclidean norm of the Newton step drops
below ``SolverConfig.tolerance``.  Linear systems are solved directly with a
sparse LU factorization of the saddle-point matrix ``[[J, C^T], [C, 0]]``; the
constraint block ``C`` is how rigid-motion gauges are imposed.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InadmissibleStateError, SolverError

__all__ = ["SolverConfig", "SolveReport", "newton_minimize", "newton_root_find",
           "rigid_constraints", "collect_reports"]

_EPS = np.finfo(float).eps
_COLLECTORS = contextvars.ContextVar("geoshell_solve_collectors", default=())


@contextmanager
def collect_reports():
    """Gather the report of every Newton solve run inside the ``with`` block."""
    bucket = []
    token = _COLLECTORS.set(_COLLECTORS.get() + (bucket,))
    try:
        yield bucket
    finally:
        _COLLECTORS.reset(token)


def _publish(rep):
    for bucket in _COLLECTORS.get():
        bucket.append(rep)
    return rep


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-4
    max_iterations: int = 100
    backtrack: float = 0.5
    armijo: float = 1e-4
    rigid_handling: str = "constraints"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.rigid_handling not in ("constraints", "none"):
            raise ValueError(f"unknown rigid handling {self.rigid_handling!r}")


@dataclass
class SolveReport:
    iterations: int = 0
    final_step_norm_squared: float = float("inf")
    final_residual_norm: float = float("nan")
    converged: bool = False
    energy_trace: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    @staticmethod
    def merge(reports):
        """Cumulative statistics of several solves (used for CLI summaries)."""
        out = SolveReport(converged=True)
        for r in reports:
            out.iterations += r.iterations
            out.converged &= r.converged
            out.energy_trace += r.energy_trace
            out.step_norms += r.step_norms
            out.final_step_norm_squared = r.final_step_norm_squared
            out.final_residual_norm = r.final_residual_norm
        if not reports:
            out.final_step_norm_squared = 0.0
            out.final_residual_norm = 0.0
        return out


def rigid_constraints(x):
    """6 x 3M matrix: net translation and linearised rotation about the barycenter of ``x``.

    Rows are scaled so that entries are O(1/M) regardless of mesh size and scale.
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    r = x - x.mean(axis=0)
    L = max(np.sqrt((r * r).sum() / m), 1e-300)
    r = r / L
    idx = np.arange(m)
    rows, cols, vals = [], [], []
    for a in range(3):
        rows.append(np.full(m, a))
        cols.append(3 * idx + a)
        vals.append(np.ones(m))
    # (r x d)_a = r_b d_c - r_c d_b for (a, b, c) cyclic
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        rows += [np.full(m, 3 + a), np.full(m, 3 + a)]
        cols += [3 * idx + c, 3 * idx + b]
        vals += [r[:, b], -r[:, c]]
    C = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(6, 3 * m))
    return C / m


def _kkt_solve(J, rhs, C=None, rc=None):
    n = J.shape[0]
    if C is None or C.shape[0] == 0:
        A, b = sp.csc_matrix(J), rhs
    else:
        A = sp.bmat([[J, C.T], [C, None]], format="csc")
        b = np.concatenate([rhs, -rc if rc is not None else np.zeros(C.shape[0])])
    try:
        lu = spla.splu(A)
        z = lu.solve(b)
    except RuntimeError as exc:
        raise SolverError(f"singular Newton system: {exc}") from None
    if not np.all(np.isfinite(z)):
        raise SolverError("singular Newton system (non-finite solution)")
    res = A @ z - b
    if np.linalg.norm(res) > 1e-6 * (np.linalg.norm(b) + 1e-300) + 1e-12:
        raise SolverError("ill-conditioned Newton system")
    return z[:n]


def _safe(f, x):
    try:
        v = f(x)
    except InadmissibleStateError:
        return np.inf
    return v if np.isfinite(v) else np.inf


def newton_minimize(value, derivatives, x0, cfg=SolverConfig(), constraints=None):
    """Minimise a smooth objective.

    ``value(x)`` returns the objective, ``derivatives(x)`` the triple
    ``(f, g, H)`` with a sparse Hessian; ``constraints(x)`` optionally returns
    a sparse matrix ``C`` and the update is restricted to ``C dx = 0``.
    Inadmissible trial points count as infinite energy.  Returns
    ``(x, SolveReport)``; a report with ``converged=False`` means the
    iteration limit was hit.
    """
    x = np.array(x0, dtype=float).ravel()
    rep = SolveReport()
    for it in range(cfg.max_iterations + 1):
        f, g, H = derivatives(x)
        g = np.asarray(g, dtype=float).ravel()
        if not rep.energy_trace:
            rep.energy_trace.append(float(f))
        C = constraints(x) if constraints is not None else None
        dx = _descent_step(H, g, C)
        nsq = float(dx @ dx)
        rep.step_norms.append(nsq)
        rep.final_step_norm_squared = nsq
        rep.final_residual_norm = float(np.linalg.norm(g if C is None else _project(g, C)))
        if nsq < cfg.tolerance:
            fn = _safe(value, x + dx)
            if fn <= f + 4 * _EPS * abs(f):
                x = x + dx
                f = fn
            rep.energy_trace.append(float(f))
            rep.converged = True
            return x, _publish(rep)
        if it == cfg.max_iterations:
            break
        slope = float(g @ dx)
        alpha = 1.0
        while True:
            fn = _safe(value, x + alpha * dx)
            if fn <= f + cfg.armijo * alpha * slope or (
                    fn <= f + 4 * _EPS * abs(f) and alpha * alpha * nsq < cfg.tolerance):
                break
            alpha *= cfg.backtrack
            if alpha < 1e-12:
                raise SolverError("line search failed to find a descent step")
        x = x + alpha * dx
        rep.iterations += 1
        rep.energy_trace.append(float(fn))
    return x, _publish(rep)


def _project(g, C):
    # component of g orthogonal to the rows of C
    Cd = C.toarray()
    coef = np.linalg.lstsq(Cd @ Cd.T, Cd @ g, rcond=None)[0]
    return g - Cd.T @ coef


def _descent_step(H, g, C):
    H = sp.csr_matrix(H)
    n = H.shape[0]
    mu = 0.0
    scale = max(abs(H.diagonal()).max(initial=0.0), 1e-12)
    for _ in range(40):
        Hm = H if mu == 0.0 else H + mu * sp.identity(n, format="csr")
        try:
            dx = _kkt_solve(Hm, -g, C)
        except SolverError:
            dx = None
        if dx is not None and (g @ dx < 0 or not np.any(dx)):
            return dx
        mu = 1e-8 * scale if mu == 0.0 else 10.0 * mu
    raise SolverError("could not regularise the Hessian into a descent direction")


def newton_root_find(residual, x0, cfg=SolverConfig(), constraints=None):
    """Solve ``F(x) = 0`` by Newton's method with backtracking on ``|F|^2``.

    ``residual(x)`` returns ``(F, J)``; ``constraints(x)`` optionally returns
    ``(C, r)`` meaning the augmented condition ``r(x) = 0`` with Jacobian
    ``C``, solved together with ``F`` in one saddle-point system.
    """
    x = np.array(x0, dtype=float).ravel()
    rep = SolveReport()

    def merit(z):
        F, _ = residual(z)
        val = float(F @ F)
        if constraints is not None:
            _, r = constraints(z)
            val += float(r @ r)
        return val

    for it in range(cfg.max_iterations + 1):
        try:
            F, J = residual(x)
        except InadmissibleStateError as exc:
            raise SolverError(f"root-finding iterate became inadmissible: {exc}") from None
        C, r = constraints(x) if constraints is not None else (None, None)
        phi = float(F @ F) + (float(r @ r) if r is not None else 0.0)
        rep.energy_trace.append(phi)
        rep.final_residual_norm = float(np.sqrt(phi))
        dx = _kkt_solve(sp.csr_matrix(J), -F, C, r)
        nsq = float(dx @ dx)
        rep.step_norms.append(nsq)
        rep.final_step_norm_squared = nsq
        if nsq < cfg.tolerance:
            if np.isfinite(_safe(merit, x + dx)):
                x = x + dx
            rep.converged = True
            return x, _publish(rep)
        if it == cfg.max_iterations:
            break
        alpha = 1.0
        while True:
            pn = _safe(merit, x + alpha * dx)
            if pn <= (1.0 - 2.0 * cfg.armijo * alpha) * phi or (
                    pn <= phi and alpha * alpha * nsq < cfg.tolerance):
                break
            alpha *= cfg.backtrack
            if alpha < 1e-12:
                raise SolverError("line search on the residual norm failed")
        x = x + alpha * dx
        rep.iterations += 1
    return x, _publish(rep)
