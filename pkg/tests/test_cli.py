import json

import numpy as np
import pytest

from geoshell import shapes
from geoshell.cli import main, report_schema
from geoshell.mesh import Displacement, read_obj, save_displacement, write_obj

from conftest import jitter


@pytest.fixture
def meshes(tmp_path):
    base = shapes.icosahedron()
    paths = []
    for i in range(6):
        p = tmp_path / f"s{i}.obj"
        write_obj(p, jitter(base, 0.2, seed=i))
        paths.append(str(p))
    return paths


def run(args, out):
    code = main(args + ["--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    return code, report


def test_flat_geodesic_with_verify(meshes, tmp_path):
    out = tmp_path / "geo"
    code, rep = run(["geodesic", meshes[0], meshes[1], "--backend", "flatQuadratic", "--K", "4",
                     "--verify"], out)
    assert code == 0 and rep["status"] == "ok"
    assert rep["K"] == 4 and len(rep["frames"]) == 5
    assert rep["result"]["oracle_max_error"] < 1e-12
    assert (out / "frame_0004.obj").exists()
    assert rep["material"] == {"lambda": 1.0, "mu": 1.0, "delta": 0.01}


@pytest.mark.parametrize("cmd, extra", [
    ("bezier", ["--samples", "4"]),
    ("cardinal", ["--samples", "6", "--kappa", "1.0"]),
    ("subdivide", ["--levels", "2", "--scheme", "ternary4", "--boundary", "closed"]),
    ("subdivide", ["--levels", "1", "--scheme", "binary6"]),
])
def test_flat_commands_verify(meshes, tmp_path, cmd, extra):
    code, rep = run([cmd, *meshes, "--backend", "flatQuadratic", "--K", "2", "--verify", *extra],
                    tmp_path / "o")
    assert code == 0
    assert rep["result"]["oracle_max_error"] < 1e-10


def test_subdivide_layout(meshes, tmp_path):
    out = tmp_path / "sub"
    code, rep = run(["subdivide", *meshes[:4], "--backend", "flatQuadratic", "--levels", "2"], out)
    assert code == 0
    counts = [lv["count"] for lv in rep["result"]["levels"]]
    assert counts == [4, 7, 13]
    assert (out / "level_2" / "frame_0012.obj").exists()
    assert rep["result"]["levels"][0]["solves"] == 0


def test_log_exp_transport_hermite(meshes, tmp_path):
    code, rep = run(["log", meshes[0], meshes[1], "--backend", "flatQuadratic", "--verify"],
                    tmp_path / "log")
    assert code == 0 and rep["result"]["oracle_max_error"] < 1e-12
    xi = str(tmp_path / "log" / "log.txt")
    code, rep = run(["exp", meshes[0], xi, "--backend", "flatQuadratic", "--t", "2",
                     "--samples", "2"], tmp_path / "exp")
    assert code == 0
    a, b = read_obj(meshes[0])[0], read_obj(meshes[1])[0]
    end = read_obj(tmp_path / "exp" / "frame_0002.obj")[0]
    assert np.abs(end.positions - (2 * b.positions - a.positions)).max() < 1e-10
    code, rep = run(["transport", "--eta", xi, meshes[0], meshes[2], meshes[3],
                     "--backend", "flatQuadratic"], tmp_path / "tr")
    assert code == 0 and rep["K"] == 2
    assert rep["result"]["norm_out"] == pytest.approx(rep["result"]["norm_in"], rel=1e-12)
    code, rep = run(["hermite", meshes[0], xi, xi, meshes[1], "--backend", "flatQuadratic",
                     "--samples", "3"], tmp_path / "her")
    assert code == 0 and len(rep["frames"]) == 4 + 4


def test_physical_geodesic_and_determinism(tmp_path):
    a, b = tmp_path / "a.obj", tmp_path / "b.obj"
    write_obj(a, shapes.bent_bar(0.2))
    write_obj(b, shapes.bent_bar(0.6))
    outs = []
    for name in ("r1", "r2"):
        code, rep = run(["geodesic", str(a), str(b), "--backend", "discreteShells", "--K", "2"],
                        tmp_path / name)
        assert code == 0 and rep["solve"]["converged"]
        outs.append(((tmp_path / name / "frame_0001.obj").read_bytes(), rep))
    assert outs[0][0] == outs[1][0]
    assert outs[0][1] == outs[1][1]
    assert outs[0][1]["result"]["path_energy"] <= outs[0][1]["result"]["initial_path_energy"]


def test_config_file_is_used(meshes, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("backend = flatQuadratic\nK = 3\n")
    code, rep = run(["geodesic", meshes[0], meshes[1], "--config", str(cfg)], tmp_path / "c")
    assert code == 0 and rep["K"] == 3 and rep["backend"] == "flatQuadratic"


def test_bad_obj_exits_2(meshes, tmp_path):
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0 0\nf 1 2 3 4\n")
    code, rep = run(["geodesic", str(bad), meshes[0]], tmp_path / "e")
    assert code == 2 and rep["status"] == "error"
    assert rep["error"]["exit_code"] == 2


def test_mismatched_topology_exits_3(meshes, tmp_path):
    other = tmp_path / "other.obj"
    write_obj(other, shapes.icosphere(1))
    code, rep = run(["geodesic", meshes[0], str(other), "--backend", "flatQuadratic"], tmp_path / "e")
    assert code == 3 and rep["error"]["exit_code"] == 3


def test_solver_failure_exits_4(tmp_path):
    a, b = tmp_path / "a.obj", tmp_path / "b.obj"
    write_obj(a, shapes.bent_bar(0.2))
    write_obj(b, shapes.bent_bar(1.2))
    code, rep = run(["geodesic", str(a), str(b), "--backend", "discreteShells", "--K", "2",
                     "--max-iters", "1", "--tol", "1e-30"], tmp_path / "e")
    assert code == 4
    assert rep["status"] == "error" and rep["error"]["stage"]


def test_bad_displacement_exits_3(meshes, tmp_path):
    d = tmp_path / "d.txt"
    d.write_bytes(save_displacement(Displacement.zeros(shapes.icosphere(1).topology)))
    code, _ = run(["exp", meshes[0], str(d), "--backend", "flatQuadratic"], tmp_path / "e")
    assert code == 3


def test_domain_error_exits_2(meshes, tmp_path):
    code, _ = run(["cardinal", meshes[0], meshes[1], "--backend", "flatQuadratic"], tmp_path / "e")
    assert code == 2


def test_unknown_config_key_exits_2(meshes, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = red\n")
    assert main(["geodesic", meshes[0], meshes[1], "--config", str(cfg),
                 "--out", str(tmp_path / "e")]) == 2


def test_schema_is_valid_json_schema():
    import jsonschema
    jsonschema.Draft7Validator.check_schema(report_schema())
