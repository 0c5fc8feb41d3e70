import json
from pathlib import Path

import jsonschema
import pytest

from sqcqp import cli
from sqcqp.relax import read_sdpa

DATA = Path(__file__).parent / "data"
SCHEMAS = Path(cli.__file__).parent / "schemas"


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = cli.main([*map(str, argv), "--out", str(out)])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report


def test_solve_gap_1d(tmp_path, capsys):
    code, report = run(tmp_path, "solve", DATA / "gap_1d.json")
    assert code == 0
    assert report["exact"] is False
    assert report["relaxation"]["gap_vs_certified"] == pytest.approx(1.0, abs=1e-6)
    jsonschema.validate(report, schema("solve_report"))
    assert "exact = false" in capsys.readouterr().out


def test_solve_convex_ball(tmp_path):
    code, report = run(tmp_path, "solve", DATA / "convex_ball.json")
    assert code == 0 and report["exact"] is True
    assert report["certificate"]["verdict"] == "CertifiedGlobal"


def test_solve_malformed(tmp_path):
    assert run(tmp_path, "solve", DATA / "malformed.json")[0] == cli.EXIT_PARSE
    assert run(tmp_path, "solve", tmp_path / "missing.json")[0] == cli.EXIT_PARSE


def test_bad_arguments():
    assert cli.main(["frobnicate", "x.json"]) == cli.EXIT_PARSE
    assert cli.main(["solve", "x.json", "--tol", "-1"]) == cli.EXIT_PARSE


def test_solve_infeasible_relaxation(tmp_path):
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps({"n": 2, "objective": {"a": 1, "b": [0, 0], "c": 0},
                                "constraints": [{"a": 1, "b": [0, 0], "c": 1}]}))
    assert run(tmp_path, "solve", path)[0] == cli.EXIT_SOLVER


def test_certify(tmp_path):
    code, report = run(tmp_path, "certify", DATA / "ball_complement.json", "--point", DATA / "point_e1.json")
    assert code == 0 and report["verdict"] == "CertifiedGlobal"
    assert report["gamma"] == pytest.approx([0.5])
    jsonschema.validate(report, schema("certify_report"))


def test_certify_non_kkt_point(tmp_path):
    point = tmp_path / "pt.json"
    point.write_text(json.dumps({"x": [2.0, 0.0, 0.0, 0.0]}))
    code, _ = run(tmp_path, "certify", DATA / "ball_complement.json", "--point", point)
    assert code == cli.EXIT_MULTIPLIERS


def test_relax_exports(tmp_path):
    out = tmp_path / "e.dat-s"
    assert cli.main(["relax", str(DATA / "gap_1d.json"), "--out", str(out)]) == 0
    assert read_sdpa(out.read_text())["blocks"] == [2, -2]
    out = tmp_path / "e.json"
    assert cli.main(["relax", str(DATA / "gap_1d.json"), "--format", "socp-json", "--out", str(out)]) == 0
    jsonschema.validate(json.loads(out.read_text()), schema("socp"))


def test_relax_write_failure(tmp_path):
    target = tmp_path / "no" / "such" / "dir" / "e.dat-s"
    assert cli.main(["relax", str(DATA / "gap_1d.json"), "--out", str(target)]) == cli.EXIT_WRITE


def test_omega_check(tmp_path):
    code, report = run(tmp_path, "omega-check", DATA / "ball_complement.json", "--samples", 100)
    assert code == 0 and report["passes"] == 100
    jsonschema.validate(report, schema("omega_report"))
    assert run(tmp_path, "omega-check", DATA / "gap_1d.json")[0] == cli.EXIT_STRUCTURAL


def test_p1(tmp_path):
    code, report = run(tmp_path, "p1", DATA / "p1_sphere.json")
    assert code == 0 and report["branch"] == "SingletonZeroW"
    assert report["objective"] == pytest.approx(0.5)
    jsonschema.validate(report, schema("p1_report"))


def test_p1_no_candidate(tmp_path):
    path = tmp_path / "p1.json"
    path.write_text(json.dumps({"n": 2, "z": [0, 0], "constraints": [
        {"a": 0, "b": [0, 0], "c": 1}, {"a": 0, "b": [0, 0], "c": 1}]}))
    code, report = run(tmp_path, "p1", path)
    assert code == cli.EXIT_NO_CANDIDATE and report["candidates"]


@pytest.mark.parametrize("command,extra", [
    ("solve", []), ("omega-check", ["--samples", "50"]), ("p1", []),
])
def test_reports_are_byte_identical(tmp_path, command, extra):
    src = DATA / ("p1_sphere.json" if command == "p1" else "ball_complement.json")
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert cli.main([command, str(src), "--out", str(out), *extra]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


@pytest.mark.parametrize("name", ["problem", "p1"])
def test_input_files_match_schemas(name):
    files = {"problem": ["gap_1d.json", "ball_complement.json", "convex_ball.json"], "p1": ["p1_sphere.json"]}
    for f in files[name]:
        jsonschema.validate(json.loads((DATA / f).read_text()), schema(name))
