"""The ten acceptance criteria, one test each.

Every test records a one-line verdict that pytest prints in a final
"acceptance criteria" section.
"""
import math
import time

import numpy as np
import pytest

from geoshell import loop, shapes
from geoshell.calculus import (average, average_general, discrete_exp, discrete_log, el_residual,
                               geodesic, parallel_transport)
from geoshell.curves import BezierSpec, CardinalSpec, CardinalSpline, bezier, hermite
from geoshell.energy import (DiscreteShells, FlatQuadratic, SubdivisionFEM, eval_w, grad_w1,
                             grad_w2, hess_w)
from geoshell.mesh import Displacement, Shell
from geoshell.oracle import (bezier_points, cardinal_points, expand_scheme_to_mask, fd_gradient,
                             fd_hessian_action, hermite_points, linear_refine)
from geoshell.shapes import random_rotation
from geoshell.solver import SolverConfig
from geoshell.subdivision import SCHEMES, SchemeSpec, subdivide_curve

from conftest import jitter, record


def _max(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def test_criterion_01_euclidean_oracles():
    start = time.perf_counter()
    be = FlatQuadratic()
    base = shapes.tube(n_around=6, n_rings=8)
    assert base.topology.n_vertices == 50
    keys = [jitter(base, 0.3, seed=100 + i) for i in range(6)]
    P = np.array([k.positions for k in keys])
    a, b = keys[0], keys[1]
    rng = np.random.default_rng(7)
    err = {}
    K = 4
    path = geodesic(be, a, b, K).path
    err["geodesic"] = max(_max(s.positions, (1 - k / K) * a.positions + k / K * b.positions)
                          for k, s in enumerate(path))
    err["average"] = _max(average(be, a, b, 0.25, K).positions, 0.75 * a.positions + 0.25 * b.positions)
    err["averageGeneral"] = max(_max(average_general(be, a, b, t, K).positions,
                                     (1 - t) * a.positions + t * b.positions) for t in (0.1, 0.45, 0.8))
    xi = discrete_log(be, a, b, K)
    err["log"] = _max(xi.values, b.positions - a.positions)
    err["exp"] = max(_max(discrete_exp(be, a, xi, t, K).positions, a.positions + t * xi.values)
                     for t in (0.3, 1.0, 1.6))
    eta = Displacement(a.topology, rng.normal(size=a.positions.shape))
    err["transport"] = _max(parallel_transport(be, path, eta).values, eta.values)
    spec = BezierSpec(keys[:4], K, be)
    err["bezier"] = max(_max(bezier(spec, t).positions, bezier_points(P[:4], t)) for t in (0.2, 0.5, 0.9))
    va = Displacement(a.topology, rng.normal(size=a.positions.shape))
    vb = Displacement(a.topology, rng.normal(size=a.positions.shape))
    err["hermite"] = max(_max(hermite(be, a, va, vb, b, t, K).positions,
                              hermite_points(a.positions, va.values, vb.values, b.positions, t))
                         for t in (0.3, 0.7))
    spline = CardinalSpline(CardinalSpec(keys[:4], 0.5, 2, be))
    err["cardinal"] = max(_max(spline(t).positions, cardinal_points(P[:4], 0.5, t)) for t in (0.4, 1.5, 2.6))
    for scheme in SCHEMES:
        for boundary in ("closed", "clampedEndpoints"):
            lv = subdivide_curve(SchemeSpec(scheme, keys, 2, boundary, 2, be))
            ref = linear_refine(P, scheme, boundary == "closed", 2)
            err[f"{scheme}/{boundary}"] = _max([s.positions for s in lv[-1].shells], ref)
    elapsed = time.perf_counter() - start
    worst = max(err, key=err.get)
    ok = err[worst] <= 1e-10 and elapsed < 10.0
    record(1, ok, f"max abs error {err[worst]:.1e} ({worst}), {elapsed:.1f} s")
    assert err[worst] <= 1e-10, err
    assert elapsed < 10.0


def test_criterion_02_derivatives_match_finite_differences():
    start = time.perf_counter()
    s = jitter(shapes.bent_bar(0.2), 0.02, seed=21)
    t = jitter(shapes.bent_bar(0.8), 0.02, seed=22)
    top = s.topology
    assert top.n_vertices <= 200
    v = np.random.default_rng(23).normal(size=3 * top.n_vertices)
    worst_g, worst_h = 0.0, 0.0
    for be in (DiscreteShells(), SubdivisionFEM()):
        def shell(x):
            return Shell(top, np.reshape(x, (-1, 3)), check=False)

        g1, g2 = grad_w1(be, s, t).values, grad_w2(be, s, t).values
        fd1 = fd_gradient(lambda x: eval_w(be, shell(x), t), s.positions)
        fd2 = fd_gradient(lambda x: eval_w(be, s, shell(x)), t.positions)
        worst_g = max(worst_g, _max(g1, fd1) / np.abs(g1).max(), _max(g2, fd2) / np.abs(g2).max())
        checks = [("11", lambda x: grad_w1(be, shell(x), t).values.ravel(), s),
                  ("22", lambda x: grad_w2(be, s, shell(x)).values.ravel(), t),
                  ("12", lambda x: grad_w1(be, s, shell(x)).values.ravel(), t)]
        for slots, grad, x0 in checks:
            Hv = hess_w(be, s, t, slots) @ v
            fd = fd_hessian_action(grad, x0.positions.ravel(), v)
            worst_h = max(worst_h, _max(Hv, fd) / np.abs(Hv).max())
    elapsed = time.perf_counter() - start
    ok = worst_g < 1e-5 and worst_h < 1e-4 and elapsed < 60
    record(2, ok, f"gradient rel err {worst_g:.1e}, Hessian-vector rel err {worst_h:.1e}, "
                  f"{elapsed:.1f} s")
    assert worst_g < 1e-5 and worst_h < 1e-4 and elapsed < 60


def test_criterion_03_energy_axioms():
    rng = np.random.default_rng(31)
    s = jitter(shapes.bent_bar(0.4), 0.01, seed=32)
    t = jitter(shapes.bent_bar(1.0), 0.01, seed=33)
    scale = s.scale
    out = {}
    for be in (DiscreteShells(), SubdivisionFEM()):
        name = type(be).__name__
        w0 = abs(eval_w(be, s, s))
        g0 = np.abs(grad_w2(be, s, s).values).max()
        R, b = random_rotation(rng), rng.normal(size=3)
        w = eval_w(be, s, t)
        rig = abs(eval_w(be, s, t.moved(R, b)) - w) / w
        H = hess_w(be, s, s, "22")
        c = s.positions.mean(axis=0)
        fields = [np.cross(e, s.positions - c).ravel() for e in np.eye(3)]
        fields += [np.tile(e, (len(s), 1)).ravel() for e in np.eye(3)]
        kern = max(np.abs(H @ f).max() for f in fields) / (abs(H).max() * scale)
        out[name] = (w0, g0 / scale, rig, kern)
    ok = all(w0 <= 1e-12 and g0 <= 1e-10 and rig <= 1e-10 and kern <= 1e-8
             for w0, g0, rig, kern in out.values())
    detail = "; ".join(f"{n}: W(s,s)={v[0]:.0e} grad={v[1]:.0e} rigid={v[2]:.0e} kernel={v[3]:.0e}"
                       for n, v in out.items())
    record(3, ok, detail)
    assert ok, out


def test_criterion_04_geodesics_solve_euler_lagrange():
    a, b = shapes.bent_bar(0.2), shapes.bent_bar(1.0)
    cfg = SolverConfig()
    lines, ok = [], True
    for be in (DiscreteShells(), SubdivisionFEM()):
        res = geodesic(be, a, b, 4, cfg)
        el = float(np.abs(el_residual(be, res.path)).max())
        good = el <= 10 * cfg.tolerance and res.energy <= res.init_energy
        ok &= good
        lines.append(f"{type(be).__name__}: EL {el:.1e}, energy {res.energy:.6g} <= {res.init_energy:.6g}")
    record(4, ok, "; ".join(lines))
    assert ok


def test_criterion_05_log_exp_inversion():
    a, b = shapes.bent_bar(0.2), shapes.bent_bar(0.9)
    be = SubdivisionFEM()
    errs = {}
    for K in (2, 4, 8):
        xi = discrete_log(be, a, b, K)
        errs[K] = _max(discrete_exp(be, a, xi, 1.0, K).positions, b.positions) / a.scale
    ok = max(errs.values()) <= 1e-6
    record(5, ok, ", ".join(f"K={K}: {e:.1e}" for K, e in errs.items()) + " (relative to mesh scale)")
    assert ok


def test_criterion_06_log_converges_first_order():
    start = time.perf_counter()
    be = DiscreteShells()
    a, b = shapes.bent_bar(0.2), shapes.bent_bar(0.9)
    logs = {K: discrete_log(be, a, b, K).values for K in (2, 4, 8, 16, 32)}
    diffs = [float(np.linalg.norm(logs[2 * K] - logs[K])) for K in (2, 4, 8, 16)]
    orders = [math.log2(diffs[i] / diffs[i + 1]) for i in range(3)]
    elapsed = time.perf_counter() - start
    ok = all(d1 < d0 for d0, d1 in zip(diffs, diffs[1:])) and min(orders) >= 0.8 and elapsed < 600
    record(6, ok, "orders " + ", ".join(f"{o:.3f}" for o in orders) + f", {elapsed:.0f} s")
    assert ok, (diffs, orders)


def test_criterion_07_interpolation_invariants():
    be = DiscreteShells()
    keys = [shapes.bent_bar(x) for x in (0.1, 0.5, 0.9)]
    spline = CardinalSpline(CardinalSpec(keys, 0.5, 2, be))
    hits = all(np.array_equal(spline(j).positions, keys[j].positions) for j in range(3))
    base = shapes.icosahedron()
    ctrl = [jitter(base, 0.05, seed=70 + i) for i in range(6)]
    kept = True
    for scheme in SCHEMES:
        boundary = "closed" if scheme == "binary6" else "clampedEndpoints"
        levels = subdivide_curve(SchemeSpec(scheme, ctrl, 2, boundary, 2, be))
        f = 3 if scheme == "ternary4" else 2
        for lo, hi in zip(levels, levels[1:]):
            kept &= all(np.array_equal(hi.shells[f * k].positions, s.positions)
                        for k, s in enumerate(lo.shells))
    record(7, hits and kept, f"keyframes hit exactly: {hits}; coarse shells kept at every level: {kept}")
    assert hits and kept


def test_criterion_08_scheme_masks():
    from fractions import Fraction as F
    expected = {
        "binary4": [(F(-1, 16), F(9, 16), F(9, 16), F(-1, 16))],
        "binary6": [(F(3, 256), F(-25, 256), F(75, 128), F(75, 128), F(-25, 256), F(3, 256))],
        "ternary4": [(F(-7, 99), F(76, 99), F(34, 99), F(-4, 99)),
                     (F(-4, 99), F(34, 99), F(76, 99), F(-7, 99))],
    }
    got = {s: [m.coefficients for m in expand_scheme_to_mask(s)] for s in SCHEMES}
    ok = got == expected
    record(8, ok, "binary4 [-1,9,9,-1]/16, binary6 [3,-25,150,150,-25,3]/256, "
                  "ternary4 [-7,76,34,-4]/99 and mirror")
    assert ok


@pytest.mark.slow
def test_criterion_09_cactus_smoke_run():
    poses = (0.5, 2.0)
    sA, sB = shapes.cactus(poses[0]), shapes.cactus(poses[1])
    be = SubdivisionFEM()
    start = time.perf_counter()
    res = geodesic(be, sA, sB, 6, SolverConfig(tolerance=1e-4))
    elapsed = time.perf_counter() - start
    converged = res.report.converged and res.energy <= res.init_energy
    # At the paper tolerance the coupled solve stops after two steps; to see
    # three steps of the tail the same computation is repeated with the
    # stopping tolerance lowered to just above the round-off floor.
    tail = geodesic(be, sA, sB, 6, SolverConfig(tolerance=1e-12))
    n = np.sqrt(tail.report.step_norms)[-3:]
    c1, c2 = n[1] / n[0] ** 2, n[2] / n[1] ** 2
    quadratic = len(n) == 3 and 0.2 <= c2 / c1 <= 5.0
    ok = converged and quadratic and elapsed <= 600
    record(9, ok, f"{sA.topology.n_vertices} vertices, K=6, eps=1e-4 run {elapsed:.0f} s, "
                  f"{res.report.iterations} coupled steps; tail step norms "
                  + ", ".join(f"{x:.2e}" for x in n) + f", |d+|/|d|^2 = {c1:.2f}, {c2:.2f}")
    assert ok


def test_criterion_10_subdivision_fem_sanity():
    s = shapes.icosphere(4)
    fine, S, _ = loop.subdivision_matrix(s.topology)
    J = (loop.jet_operator(fine, rows=(1, 2)) @ (S @ s.positions)).reshape(-1, 2, 3)
    area = loop.MID_EDGE_WEIGHT * np.linalg.norm(np.cross(J[:, 0], J[:, 1]), axis=1).sum()
    area_err = abs(area / (4 * np.pi) - 1)

    rng = np.random.default_rng(101)
    tube = shapes.tube()
    t1, s1 = loop.refine_once(tube.topology, tube)
    t2, s2 = loop.refine_once(t1, s1)

    def pos(shell, face, bary):
        p = loop.patch(shell.topology, face)
        j = p.irregular_corner or 0
        return loop.evaluate_jet(shell, p, tuple(bary[(j + k) % 3] for k in range(3))).position

    children = np.array([((1, 0, 0), (.5, .5, 0), (.5, 0, .5)), ((.5, .5, 0), (0, 1, 0), (0, .5, .5)),
                         ((.5, 0, .5), (0, .5, .5), (0, 0, 1)), ((.5, .5, 0), (0, .5, .5), (.5, 0, .5))])
    A, b0 = rng.normal(size=(3, 3)), rng.normal(size=3)
    moved = Shell(t1, s1.positions @ A.T + b0, check=False)
    refine_err = affine_err = 0.0
    for f in range(t1.n_faces):
        bary = rng.dirichlet([1, 1, 1])
        c = f % 4
        refine_err = max(refine_err, _max(pos(s1, f, bary @ children[c]), pos(s2, 4 * f + c, bary)))
        affine_err = max(affine_err, _max(pos(moved, f, bary), pos(s1, f, bary) @ A.T + b0))
    ok = area_err < 0.01 and refine_err < 1e-10 and affine_err < 1e-12
    record(10, ok, f"sphere area error {100 * area_err:.2f}%, refinement invariance {refine_err:.1e}, "
                   f"affine precision {affine_err:.1e}")
    assert ok
