# fsforge/tests/test_cli.py
import json
from pathlib import Path

import pytest

import cli.routes as routes
from cli.models import FamilyFile, Problem, RunConfig, load_m1_counts, load_m2_tensors, parse_grid, parse_pair
from core.exceptions import ProblemFileError
from main import build_parser, main

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def _report(directory: Path, name: str) -> dict:
    return json.loads((directory / name).read_text())


# ==================== argument parsing ====================

def test_parse_grid_and_pair():
    assert parse_grid("32x48") == (32, 48)
    assert parse_pair("0,2") == (0, 2)
    with pytest.raises(ValueError):
        parse_grid("32")
    with pytest.raises(ValueError):
        parse_pair("a,b")


def test_parser_knows_every_command():
    args = build_parser().parse_args(["floer", "p.json", "--grid", "32x32", "--pair", "0,1"])
    assert args.command == "floer"
    assert args.grid == (32, 32)
    assert args.pair == (0, 1)
    args = build_parser().parse_args(["category", "p.json", "--m1", "m1.json", "--log-file", "run.log"])
    assert args.m1 == Path("m1.json")
    assert args.log_file == Path("run.log")
    with pytest.raises(SystemExit):
        build_parser().parse_args(["serve", "p.json"])


def test_run_config_rejects_unknown_command(tmp_path):
    with pytest.raises(ValueError):
        RunConfig(command="serve", problem=tmp_path / "p.json", output=tmp_path)


# ==================== problem files ====================

def test_problem_json_and_toml_agree():
    from_json = Problem.load(PROBLEMS / "cubic.json")
    from_toml = Problem.load(PROBLEMS / "cubic.toml")
    assert from_json.function.coefficients == from_toml.function.coefficients
    assert from_json.alpha == from_toml.alpha
    assert from_json.pair == (0, 1)


def test_problem_file_errors(tmp_path):
    with pytest.raises(ProblemFileError):
        Problem.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"alpha": 1.0}))
    with pytest.raises(ProblemFileError):
        Problem.load(bad)
    bad.write_text(json.dumps({"coefficients": [0, ["x", 1]]}))
    with pytest.raises(ProblemFileError):
        Problem.load(bad)


def test_family_file():
    family_file = FamilyFile.load(PROBLEMS / "wallcross_crossing.json")
    assert family_file.pair == (0, 2)
    assert family_file.steps == 64
    assert len(family_file.family.knots) == 2


def test_side_files(tmp_path):
    m1 = tmp_path / "m1.json"
    m1.write_text(json.dumps({"0,1": [[0, 1, 3]]}))
    assert load_m1_counts(m1) == {(0, 1): {(0, 1): 3}}
    m2 = tmp_path / "m2.json"
    m2.write_text(json.dumps({"0,1,2": [[[1]]]}))
    assert load_m2_tensors(m2)[(0, 1, 2)].shape == (1, 1, 1)
    m1.write_text(json.dumps({"0,1": [[0, 1]]}))
    with pytest.raises(ProblemFileError):
        load_m1_counts(m1)


# ==================== commands ====================

def test_order_report(tmp_path):
    code = main(["order", str(PROBLEMS / "cubic.json"), "--alpha", "1.5707963", "-o", str(tmp_path)])
    assert code == 0
    report = _report(tmp_path, "order.json")
    assert report["success"]
    assert report["data"]["geometry"]["order"] == [0, 1]
    assert report["tolerances"]["TOL_ROOT"] == 1e-12
    assert report["version"].startswith("v")


def test_crit_report(tmp_path):
    assert main(["crit", str(PROBLEMS / "quartic.json"), "-o", str(tmp_path)]) == 0
    data = _report(tmp_path, "crit.json")["data"]
    assert data["degree"] == 4
    assert len(data["critical_points"]) == 3
    assert data["gradient_like"]["passed"]


def test_flows_report_and_picture(tmp_path):
    assert main(["flows", str(PROBLEMS / "cubic.json"), "-o", str(tmp_path)]) == 0
    data = _report(tmp_path, "flows.json")["data"]
    assert data["connections"]["0,1"]["count"] == 1
    assert (tmp_path / "flows.svg").read_text().startswith("<svg")


def test_grade_report(tmp_path):
    assert main(["grade", str(PROBLEMS / "cubic.json"), "-o", str(tmp_path)]) == 0
    data = _report(tmp_path, "grade.json")["data"]
    assert len(data["gradings"]) == 1
    generator = data["gradings"][0]["generators"][0]
    assert generator["nondegenerate"]
    assert isinstance(generator["grading"], int)


def test_floer_report(tmp_path):
    code = main(["floer", str(PROBLEMS / "cubic.json"), "--grid", "32x32", "-o", str(tmp_path)])
    assert code == 0
    data = _report(tmp_path, "floer.json")["data"]
    assert data["grid"]["ns"] == 32
    assert data["witten_form"]["passed"]
    for name in ("field.json", "residual.png", "field.png"):
        assert (tmp_path / name).exists()


def test_category_report(tmp_path):
    assert main(["category", str(PROBLEMS / "cubic.json"), "-o", str(tmp_path)]) == 0
    data = _report(tmp_path, "category.json")["data"]
    assert data["verification"]["passed"]
    assert data["category"]["objects"] == [0, 1]
    assert data["lattice"]["pairing"] == [[0, 1], [-1, 0]]


def test_wallcross_without_crossing(tmp_path):
    assert main(["wallcross", str(PROBLEMS / "wallcross_none.json"), "-o", str(tmp_path)]) == 0
    event = _report(tmp_path, "wallcross.json")["data"]["event"]
    assert event["t_crossing"] is None
    assert event["frame"] == [0, 2]


def test_wallcross_with_crossing(tmp_path):
    assert main(["wallcross", str(PROBLEMS / "wallcross_crossing.json"), "-o", str(tmp_path)]) == 0
    data = _report(tmp_path, "wallcross.json")["data"]
    assert data["passed"]
    event = data["event"]
    assert event["t_crossing"] == pytest.approx(0.4531, abs=2e-3)
    assert event["before_counts"]["0,2"] == 0
    assert event["predicted_counts"]["0,2"] == 1
    assert event["recounted_counts"] == event["predicted_counts"]


# ==================== failures ====================

def test_value_on_ray_writes_error_report(tmp_path):
    code = main(["order", str(PROBLEMS / "ray_through_value.json"), "-o", str(tmp_path)])
    assert code == 2
    report = _report(tmp_path, "error.json")
    assert not report["success"]
    assert report["error"]["error"] == "ValueOnRay"
    assert not (tmp_path / "order.json").exists()


def test_missing_problem_file(tmp_path):
    assert main(["crit", str(tmp_path / "nope.json"), "-o", str(tmp_path)]) == 1
    assert _report(tmp_path, "error.json")["error"]["error"] == "ProblemFileError"


def test_malformed_m1_file(tmp_path):
    counts = tmp_path / "m1.json"
    counts.write_text(json.dumps({"0,1": "three"}))
    code = main(["category", str(PROBLEMS / "cubic.json"), "--m1", str(counts), "-o", str(tmp_path)])
    assert code == 1
    assert _report(tmp_path, "error.json")["error"]["error"] == "ProblemFileError"


def test_unexpected_failure_is_reported(tmp_path, monkeypatch):
    def crash(config, settings):
        raise RuntimeError("boom")

    monkeypatch.setitem(routes.COMMANDS, "crit", crash)
    assert main(["crit", str(PROBLEMS / "cubic.json"), "-o", str(tmp_path)]) == 1
    report = _report(tmp_path, "error.json")
    assert not report["success"]
    assert report["error"]["error"] == "RuntimeError"
    assert report["message"] == "boom"


def test_grid_below_minimum(tmp_path):
    assert main(["floer", str(PROBLEMS / "cubic.json"), "--grid", "8x8", "-o", str(tmp_path)]) == 1


def test_reports_are_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert main(["flows", str(PROBLEMS / "cubic.json"), "--seed", "7", "-o", str(out)]) == 0
    assert (first / "flows.json").read_bytes() == (second / "flows.json").read_bytes()
    assert (first / "flows.svg").read_bytes() == (second / "flows.svg").read_bytes()
