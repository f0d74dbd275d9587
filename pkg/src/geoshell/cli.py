"""Command-line front end: ``geoshell <command> [inputs] [flags]``.

Every command writes OBJ frames and a ``report.json`` that validates against
the schema shipped in ``geoshell/data/report.schema.json``.

Exit codes: 0 success, 2 unreadable or invalid input, 3 meshes not in
correspondence, 4 a solve failed (non-convergence, singular system,
inadmissible iterate).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import __version__, oracle
from .config import ConfigError, load_config
from .curves import BezierSpec, CardinalSpec, CardinalSpline, bezier, hermite_controls
from .errors import (CorrespondenceError, DomainError, GeoShellError, InadmissibleStateError,
                     NonConvergenceError, ObjParseError, SolverError, UnsupportedMeshError)
from .calculus import discrete_log, exp_path, geodesic, parallel_transport
from .mesh import (DiscretePath, load_displacement, read_obj, require_correspondence,
                   save_displacement, write_frames)
from .solver import SolveReport, collect_reports
from .subdivision import RefinedPolygon, SchemeSpec, refine

log = logging.getLogger("geoshell")

EXIT_INPUT, EXIT_CORRESPONDENCE, EXIT_SOLVE = 2, 3, 4

DEFAULT_K = {"geodesic": 8, "bezier": 4, "hermite": 4, "cardinal": 4, "subdivide": 4,
             "exp": 4, "log": 4, "transport": 1}


def report_schema():
    text = resources.files("geoshell").joinpath("data/report.schema.json").read_text("utf-8")
    return json.loads(text)


class _Run:
    """State shared by one command: config, backend, output directory, report."""

    def __init__(self, command, cfg, inputs):
        self.command = command
        self.cfg = cfg
        self.backend = cfg.make_backend()
        self.K = cfg.steps(DEFAULT_K[command])
        self.solver = cfg.solver()
        self.out = cfg.out
        self.report = {
            "command": command, "version": __version__, "backend": cfg.backend,
            "material": {"lambda": cfg.lam, "mu": cfg.mu, "delta": cfg.delta},
            "solver": {"tolerance": cfg.tolerance, "max_iterations": cfg.max_iterations,
                       "rigid_handling": cfg.rigid_handling},
            "K": self.K, "inputs": list(inputs), "frames": [], "status": "ok", "result": {},
        }

    def frames(self, shells, sub=""):
        d = os.path.join(self.out, sub) if sub else self.out
        names = write_frames(d, shells)
        self.report["frames"] += [os.path.relpath(n, self.out) for n in names]

    def finish(self, reports):
        merged = SolveReport.merge(reports)
        self.report["solve"] = {
            "solves": len(reports), "iterations": merged.iterations,
            "converged": bool(merged.converged),
            "max_final_step_norm_squared": max((r.final_step_norm_squared for r in reports),
                                               default=0.0),
        }
        return self.report


def _load_shells(paths):
    shells = [read_obj(p)[0] for p in paths]
    require_correspondence(*shells)
    return shells


def _uniform(n, span=1.0):
    return [span * i / n for i in range(n + 1)]


def _flat(run):
    return run.cfg.backend == "flatQuadratic"


# -- commands ----------------------------------------------------------------------

def cmd_geodesic(run, args):
    sA, sB = _load_shells([args.a, args.b])
    res = geodesic(run.backend, sA, sB, run.K, run.solver)
    run.frames(res.path)
    r = run.report["result"]
    r["path_energy"] = res.energy
    r["initial_path_energy"] = res.init_energy
    r["step_energies"] = res.step_energies
    r["newton"] = res.report.to_dict()
    if args.verify and _flat(run):
        r["oracle_max_error"] = max(
            float(np.abs(s.positions - ((1 - k / run.K) * sA.positions + k / run.K * sB.positions)).max())
            for k, s in enumerate(res.path))


def cmd_bezier(run, args):
    controls = _load_shells(args.controls)
    spec = BezierSpec(controls, run.K, run.backend, run.solver)
    ts = _uniform(run.cfg.samples)
    shells = [bezier(spec, t) for t in ts]
    run.frames(shells)
    run.report["result"]["times"] = ts
    if args.verify and _flat(run):
        P = np.array([c.positions for c in controls])
        run.report["result"]["oracle_max_error"] = max(
            float(np.abs(s.positions - oracle.bezier_points(P, t)).max()) for s, t in zip(shells, ts))


def cmd_hermite(run, args):
    sA, sB = _load_shells([args.a, args.b])
    xiA = _read_displacement(args.xi_a, sA.topology)
    xiB = _read_displacement(args.xi_b, sA.topology)
    controls = hermite_controls(run.backend, sA, xiA, xiB, sB, run.K, run.solver)
    spec = BezierSpec(controls, run.K, run.backend, run.solver)
    ts = _uniform(run.cfg.samples)
    run.frames([bezier(spec, t) for t in ts])
    run.frames(controls, "controls")
    run.report["result"]["times"] = ts


def cmd_cardinal(run, args):
    keys = _load_shells(args.keyframes)
    spline = CardinalSpline(CardinalSpec(keys, run.cfg.kappa, run.K, run.backend, run.solver))
    m = len(keys) - 1
    ts = _uniform(run.cfg.samples, m)
    shells = [spline(t) for t in ts]
    run.frames(shells)
    run.frames(spline.controls, "controls")
    r = run.report["result"]
    r["times"] = ts
    r["kappa"] = run.cfg.kappa
    r["control_count"] = len(spline.controls)
    if args.verify and _flat(run):
        P = np.array([k.positions for k in keys])
        r["oracle_max_error"] = max(
            float(np.abs(s.positions - oracle.cardinal_points(P, run.cfg.kappa, t)).max())
            for s, t in zip(shells, ts))


def cmd_subdivide(run, args):
    controls = _load_shells(args.controls)
    spec = SchemeSpec(run.cfg.scheme, controls, run.cfg.levels, run.cfg.boundary, run.K,
                      run.backend, run.solver)
    if spec.levels > 5:
        log.warning("%d subdivision levels can take hours on physical backends", spec.levels)
    poly = RefinedPolygon(0, spec.controls, spec.boundary == "closed")
    levels = []
    for level in range(spec.levels + 1):
        with collect_reports() as bucket:
            if level > 0:
                poly = refine(poly, spec.scheme, spec.backend, spec.K, spec.config)
        run.frames(poly.shells, f"level_{level}")
        levels.append({"level": level, "count": len(poly.shells), "solves": len(bucket),
                       "iterations": sum(r.iterations for r in bucket)})
        log.info("level %d: %d shells", level, len(poly.shells))
    r = run.report["result"]
    r["scheme"] = spec.scheme
    r["boundary"] = spec.boundary
    r["levels"] = levels
    if args.verify and _flat(run):
        P = np.array([c.positions for c in controls])
        ref = oracle.linear_refine(P, spec.scheme, spec.boundary == "closed", spec.levels)
        got = np.array([s.positions for s in poly.shells])
        r["oracle_max_error"] = float(np.abs(got - ref).max())


def cmd_exp(run, args):
    (sA,) = _load_shells([args.shell])
    xi = _read_displacement(args.xi, sA.topology)
    ts = _uniform(run.cfg.samples, run.cfg.t)
    shells = [exp_path(run.backend, sA, xi, t, run.K, run.solver)[1] for t in ts]
    run.frames(shells)
    run.report["result"]["times"] = ts


def cmd_log(run, args):
    sA, sB = _load_shells([args.a, args.b])
    xi = discrete_log(run.backend, sA, sB, run.K, run.solver)
    _write_displacement(run, "log.txt", xi)
    run.report["result"]["norm"] = xi.norm()
    if args.verify and _flat(run):
        run.report["result"]["oracle_max_error"] = float(
            np.abs(xi.values - (sB.positions - sA.positions)).max())


def cmd_transport(run, args):
    shells = _load_shells(args.path)
    if len(shells) < 2:
        raise DomainError("transport needs a path of at least two shells")
    eta = _read_displacement(args.eta, shells[0].topology)
    out = parallel_transport(run.backend, DiscretePath(tuple(shells)), eta, run.solver)
    run.report["K"] = len(shells) - 1
    _write_displacement(run, "transported.txt", out)
    run.report["result"]["norm_in"] = eta.norm()
    run.report["result"]["norm_out"] = out.norm()


def _read_displacement(path, topology):
    with open(path, "rb") as fh:
        return load_displacement(fh, topology)


def _write_displacement(run, name, disp):
    os.makedirs(run.out, exist_ok=True)
    with open(os.path.join(run.out, name), "wb") as fh:
        fh.write(save_displacement(disp))
    run.report["result"]["displacement_file"] = name


COMMANDS = {
    "geodesic": cmd_geodesic, "bezier": cmd_bezier, "hermite": cmd_hermite,
    "cardinal": cmd_cardinal, "subdivide": cmd_subdivide, "exp": cmd_exp, "log": cmd_log,
    "transport": cmd_transport,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--backend", choices=["subdivisionFem", "discreteShells", "flatQuadratic"])
    common.add_argument("--K", type=int, help="time steps per discrete geodesic")
    common.add_argument("--kappa", type=float, help="cardinal spline tension in [0, 3]")
    common.add_argument("--levels", type=int, help="subdivision levels")
    common.add_argument("--scheme", choices=["binary4", "binary6", "ternary4"])
    common.add_argument("--boundary", choices=["closed", "clampedEndpoints"])
    common.add_argument("--samples", type=int, help="number of sampling intervals")
    common.add_argument("--t", type=float, help="end time for exp")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", type=float, help="Newton step tolerance (squared norm)")
    common.add_argument("--max-iters", type=int, help="Newton iteration limit")
    common.add_argument("--verify", action="store_true",
                        help="with flatQuadratic, compare against closed-form references")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="geoshell", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"geoshell {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("geodesic", parents=[common], help="discrete geodesic between two shells")
    g.add_argument("a")
    g.add_argument("b")
    b = sub.add_parser("bezier", parents=[common], help="discrete Bézier curve")
    b.add_argument("controls", nargs="+")
    h = sub.add_parser("hermite", parents=[common], help="discrete cubic Hermite curve")
    h.add_argument("a")
    h.add_argument("xi_a", metavar="xiA")
    h.add_argument("xi_b", metavar="xiB")
    h.add_argument("b")
    c = sub.add_parser("cardinal", parents=[common], help="discrete cardinal spline")
    c.add_argument("keyframes", nargs="+")
    s = sub.add_parser("subdivide", parents=[common], help="interpolatory subdivision curve")
    s.add_argument("controls", nargs="+")
    e = sub.add_parser("exp", parents=[common], help="discrete exponential map")
    e.add_argument("shell")
    e.add_argument("xi")
    lg = sub.add_parser("log", parents=[common], help="discrete logarithm")
    lg.add_argument("a")
    lg.add_argument("b")
    t = sub.add_parser("transport", parents=[common], help="parallel transport along a path")
    t.add_argument("--eta", required=True, help="displacement file to transport")
    t.add_argument("path", nargs="+")
    return p


def _finite(obj):
    """Replace non-finite floats by ``None`` so the report is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _exit_code(exc):
    if isinstance(exc, CorrespondenceError):
        return EXIT_CORRESPONDENCE
    if isinstance(exc, (NonConvergenceError, SolverError, InadmissibleStateError)):
        return EXIT_SOLVE
    if isinstance(exc, (ObjParseError, ConfigError, DomainError, UnsupportedMeshError, OSError,
                        GeoShellError)):
        return EXIT_INPUT
    raise exc


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    overrides = {"backend": args.backend, "K": args.K, "kappa": args.kappa, "levels": args.levels,
                 "scheme": args.scheme, "boundary": args.boundary, "samples": args.samples,
                 "t": args.t, "out": args.out, "tolerance": args.tol,
                 "max_iterations": args.max_iters}
    inputs = [v for k, v in sorted(vars(args).items())
              if k in ("a", "b", "shell", "xi", "xi_a", "xi_b", "eta") and v is not None]
    for k in ("controls", "keyframes", "path"):
        inputs += getattr(args, k, None) or []
    run = None
    try:
        cfg = load_config(args.config, overrides)
        run = _Run(args.command, cfg, inputs)
        log.info("%s with %s backend, K=%s", args.command, cfg.backend, run.K)
        with collect_reports() as bucket:
            COMMANDS[args.command](run, args)
        report = run.finish(bucket)
        code = 0
    except (GeoShellError, OSError) as exc:
        code = _exit_code(exc)
        stage = getattr(exc, "stage", None) or args.command
        print(f"geoshell {args.command}: {stage}: {exc}", file=sys.stderr)
        if run is None:
            return code
        report = run.finish([])
        report["status"] = "error"
        report["error"] = {"exit_code": code, "stage": stage, "message": str(exc)}
    report = _finite(report)
    jsonschema.validate(report, report_schema())
    os.makedirs(run.out, exist_ok=True)
    with open(os.path.join(run.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
