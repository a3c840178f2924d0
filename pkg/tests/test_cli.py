import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import CUBE_DIRS
from lpalex import __version__
from lpalex.cli import EXIT_FAIL, EXIT_INVALID, EXIT_IO, EXIT_NOCONV, EXIT_OK, main
from lpalex.export import render_obj
from lpalex.geometry import build_polytope


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def cross_file(tmp_path):
    return write(tmp_path / "cross.json", {"n": 2, "p": -0.5, "atoms": [{"u": [1, 0], "w": math.pi / 2},
                                                                        {"u": [0, 1], "w": math.pi / 2}]})


@pytest.fixture
def cube_file(tmp_path):
    return write(tmp_path / "cube.json", {"n": 3, "p": -0.5,
                                          "atoms": [{"u": u.tolist(), "w": math.pi / 2} for u in CUBE_DIRS]})


@pytest.fixture
def rhombus_file(tmp_path):
    return write(tmp_path / "rhombus.json", {"n": 2, "p": -0.5, "inside": [{"u": [1, 0], "w": 1, "rho": 1}],
                                             "outside": [{"u": [0, 1], "w": 1}]})


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_solve_and_verify(tmp_path, cross_file, capsys):
    out = str(tmp_path / "rep.json")
    assert main(["--quiet", "solve", cross_file, "--out", out, "--multistarts", "2"]) == EXIT_OK
    doc = json.loads(open(out).read())
    assert doc["status"] == "converged"
    assert doc["scale"] == pytest.approx(1.0, abs=1e-6)
    assert doc["max_residual"] <= 1e-6
    capsys.readouterr()
    assert main(["verify", out, cross_file]) == EXIT_OK
    text = capsys.readouterr().out
    assert "PASS" in text and "atom 1: residual" in text


def test_tampered_report_fails_verification(tmp_path, cross_file):
    out = tmp_path / "rep.json"
    main(["--quiet", "solve", cross_file, "--out", str(out), "--multistarts", "1"])
    doc = json.loads(out.read_text())
    doc["radii"][0] *= 1.1
    write(out, doc)
    assert main(["--quiet", "verify", str(out), cross_file]) == EXIT_FAIL


def test_stable_output_is_byte_identical(cross_file, capsys):
    main(["--quiet", "--stable", "solve", cross_file, "--multistarts", "2"])
    first = capsys.readouterr().out
    main(["--quiet", "--stable", "solve", cross_file, "--multistarts", "2"])
    assert capsys.readouterr().out == first
    assert '"created": null' in first


def test_non_spanning_is_rejected(tmp_path, capsys):
    path = write(tmp_path / "flat.json", {"n": 3, "p": -0.5, "atoms": [{"u": [1, 0, 0], "w": 1},
                                                                       {"u": [0, 1, 0], "w": 1}]})
    assert main(["solve", path]) == EXIT_INVALID
    assert "span" in capsys.readouterr().err


def test_merged_atoms_warn_and_solve(tmp_path, capsys):
    path = write(tmp_path / "dup.json", {"n": 2, "p": -0.5, "atoms": [
        {"u": [1, 0], "w": 0.5}, {"u": [-1, 0], "w": 0.5}, {"u": [0, 1], "w": 1}, {"u": [0.6, 0.8], "w": 1}]})
    assert main(["solve", path, "--multistarts", "2"]) == EXIT_OK
    captured = capsys.readouterr()
    assert "warning:" in captured.err and "merged" in captured.err
    doc = json.loads(captured.out)
    assert [a["mu"] for a in doc["atoms"]] == [1.0, 1.0, 1.0]
    assert doc["max_residual"] <= 1e-3
    assert main(["--quiet", "solve", path, "--multistarts", "1"]) == EXIT_OK
    assert "warning" not in capsys.readouterr().err


def test_p_out_of_range(cross_file):
    assert main(["--quiet", "solve", cross_file, "--p", "0.5"]) == EXIT_INVALID
    assert main(["--quiet", "solve", cross_file, "--p", "-1.5"]) == EXIT_INVALID


def test_io_and_parse_errors(tmp_path):
    assert main(["--quiet", "solve", str(tmp_path / "missing.json")]) == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["--quiet", "solve", str(bad)]) == EXIT_INVALID
    assert main(["--quiet", "solve", str(bad), "--out", str(tmp_path / "nodir" / "r.json")]) == EXIT_INVALID


def test_unwritable_output(tmp_path, cross_file):
    assert main(["--quiet", "solve", cross_file, "--multistarts", "1",
                 "--out", str(tmp_path / "nodir" / "r.json")]) == EXIT_IO


def test_iteration_cap_reports_no_convergence(tmp_path):
    path = write(tmp_path / "m.json", {"n": 2, "p": -0.5, "atoms": [
        {"u": [1, 0], "w": 1}, {"u": [0, 1], "w": 2}, {"u": [0.6, 0.8], "w": 0.5}]})
    assert main(["--quiet", "solve", path, "--max-iters", "1", "--multistarts", "1"]) == EXIT_NOCONV


def test_exports_2d(tmp_path, cross_file):
    out = tmp_path / "run.json"
    assert main(["--quiet", "solve", cross_file, "--multistarts", "1", "--out", str(out),
                 "--export", "svg", "--export", "csv"]) == EXIT_OK
    svg = (tmp_path / "run.svg").read_text()
    assert svg.startswith("<?xml") and "<svg" in svg
    atoms = (tmp_path / "run.atoms.csv").read_text().splitlines()
    assert atoms[0] == "u0,u1,mu,rho,vertex,J,Jp,residual" and len(atoms) == 3
    assert (tmp_path / "run.trace.csv").read_text().startswith("step,phi\n")
    assert main(["--quiet", "solve", cross_file, "--multistarts", "1", "--out", str(out),
                 "--export", "obj"]) == EXIT_INVALID


def test_svg_is_reproducible(tmp_path, cross_file):
    for name in ("a", "b"):
        main(["--quiet", "solve", cross_file, "--multistarts", "1", "--out", str(tmp_path / f"{name}.json"),
              "--export", "svg"])
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def _euler(lines):
    verts = [ln for ln in lines if ln.startswith("v ")]
    faces = [[int(i) for i in ln.split()[1:]] for ln in lines if ln.startswith("f ")]
    edges = {frozenset((f[k], f[(k + 1) % len(f)])) for f in faces for k in range(len(f))}
    assert all(1 <= i <= len(verts) for f in faces for i in f)
    return len(verts) - len(edges) + len(faces), len(verts), len(faces)


def test_obj_export(tmp_path, cube_file):
    out = tmp_path / "cube_run.json"
    assert main(["--quiet", "solve", cube_file, "--multistarts", "1", "--out", str(out),
                 "--export", "obj"]) == EXIT_OK
    chi, nv, _ = _euler((tmp_path / "cube_run.obj").read_text().splitlines())
    assert chi == 2 and nv == 8


def test_obj_of_exact_cube():
    P = build_polytope(CUBE_DIRS, [math.sqrt(3)] * 4)
    lines = render_obj(P).splitlines()
    assert _euler(lines) == (2, 8, 6)
    pts = np.array([list(map(float, ln.split()[1:])) for ln in lines if ln.startswith("v ")])
    for ln in (ln for ln in lines if ln.startswith("f ")):
        idx = [int(i) - 1 for i in ln.split()[1:]]
        a, b, c = pts[idx[:3]]
        normal = np.cross(b - a, c - a)
        # counterclockwise seen from outside
        assert normal @ a > 0


def test_entropy_command(tmp_path, capsys):
    path = write(tmp_path / "sq.json", {"n": 2, "atoms": [{"u": [0.6, 0.8], "w": 1}, {"u": [0.8, -0.6], "w": 1}]})
    assert main(["entropy", path]) == EXIT_OK
    first = capsys.readouterr().out.splitlines()[0]
    assert first.startswith("E = ")
    assert float(first[4:]) == pytest.approx(2 * math.pi * math.log(2) - 4 * 0.915965594177219, abs=1e-9)


def test_curvature_command(cube_file, capsys):
    assert main(["curvature", cube_file, "--mc", "20000", "--seed", "3"]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.count("vertex") == 4 and "MC" in text
    assert f"{4 * math.pi!r}" in text


def test_radii_option_checks_length(cross_file):
    assert main(["--quiet", "entropy", cross_file, "--radii", "1,2,3"]) == EXIT_INVALID
    assert main(["--quiet", "entropy", cross_file, "--radii", "1,x"]) == EXIT_INVALID


def test_theory_check(tmp_path, rhombus_file, capsys):
    out = tmp_path / "th.json"
    assert main(["--quiet", "theory-check", rhombus_file, "--samples", "10000", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["passed"] and doc["c_f"] == 0.5 and len(doc["grid"]) == 4
    assert main(["--quiet", "theory-check", rhombus_file, "--t-grid", "auto", "--samples", "1000"]) == EXIT_OK
    assert main(["--quiet", "theory-check", rhombus_file, "--t-grid", "a,b"]) == EXIT_INVALID


def test_theory_check_fails_below_minus_one(tmp_path):
    path = write(tmp_path / "r.json", {"n": 2, "p": -1.5, "inside": [{"u": [1, 0], "w": 1, "rho": 1}],
                                       "outside": [{"u": [0, 1], "w": 1}]})
    assert main(["--quiet", "theory-check", path, "--samples", "1000"]) == EXIT_FAIL


def test_module_entry_point(cross_file):
    res = subprocess.run([sys.executable, "-m", "lpalex", "--quiet", "--stable", "solve", cross_file,
                          "--multistarts", "1"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["status"] == "converged"
