from __future__ import annotations

import json
from pathlib import Path

import pytest

from procline.cli import main
from procline.fixtures import copy_data


@pytest.fixture
def data(tmp_path: Path) -> Path:
    copy_data(tmp_path)
    return tmp_path


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def scope_args(d: Path) -> list[str]:
    return [
        d / "projects.csv", d / "products.csv",
        "--defs", d / "attrs.json", "--mapping", d / "mapping.json",
        "--constraints", d / "constraints.json", "--process-map", d / "processes.csv",
    ]


def build(capsys, d: Path) -> Path:
    assert run(capsys, "scope", *scope_args(d), "-o", d / "scope.json")[0] == 0
    code, _, _ = run(
        capsys, "build-line", d / "satmodel.json", d / "scope.json", d / "satline.rules", d / "binding.json",
        "--defs", d / "attrs.json", "--defaults", d / "defaults.json", "-o", d / "line.json",
    )
    assert code == 0
    return d / "line.json"


def test_validate_ok(capsys, data):
    assert run(capsys, "validate", data / "satmodel.json") == (0, "ok\n", "")


def test_validate_dangling_model(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"activities": [{"id": "A"}], "control_flow": [{"from": "A", "to": "B"}]}))
    code, out, err = run(capsys, "validate", bad)
    assert code == 1
    assert "DANGLING_REF" in err
    assert out == ""


def test_validate_json_format(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"work_products": [{"id": "W"}]}))
    code, out, _ = run(capsys, "validate", "--format", "json", bad)
    assert code == 1
    doc = json.loads(out)
    assert doc["valid"] is False and doc["findings"][0]["code"] == "ORPHAN_PRODUCT"


def test_unknown_command(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_file_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "validate", tmp_path / "nope.json")
    assert code == 2
    assert err.startswith("error: cannot read")


def test_bad_json_exits_two(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    code, _, err = run(capsys, "validate", bad)
    assert code == 2
    assert err.count("E_JSON") == 1


def test_code_appears_once_in_stderr(capsys, data, tmp_path):
    (data / "overlap.json").write_text(json.dumps({"fmeca_analysis": ["FMECA"], "design_rationale": ["FMECA"]}))
    run(capsys, "scope", *scope_args(data), "-o", data / "scope.json")
    code, _, err = run(
        capsys, "build-line", data / "satmodel.json", data / "scope.json", data / "satline.rules", data / "overlap.json",
        "--defs", data / "attrs.json",
    )
    assert code == 1
    assert err.count("E_OVERLAP") == 1


def test_scope_text(capsys, data):
    code, out, err = run(capsys, "scope", *scope_args(data), "--format", "text")
    assert code == 0
    assert "CORE     spice_compliance" in out
    assert "conflict Sat2: C_ENGLISH_DOCS (9) over C_MISSION_HERITAGE (4)" in out
    assert "cover: STD_PROCESS" in out


def test_scope_tie_is_module_error(capsys, data):
    args = scope_args(data)
    args[0] = data / "projects_tie.csv"
    code, _, err = run(capsys, "scope", *args)
    assert code == 1
    assert "E_TIE" in err


def test_pipeline_outputs(capsys, data):
    line = build(capsys, data)
    code, out, _ = run(capsys, "instantiate", line, data / "sat2.ctx.json")
    assert code == 0
    inst = json.loads(out)
    ids = {w["id"] for w in inst["work_products"]}
    assert "FMECA" in ids and "RationaleForDesign" in ids
    assert inst["included_vps"] == ["Opt1", "Opt2", "Opt7"]

    code, out, _ = run(capsys, "instantiate", line, data / "sat1.ctx.json", data / "sat2.ctx.json", "--out-dir", data / "out")
    assert code == 0
    assert [s["context"] for s in json.loads(out)] == ["sat1", "sat2"]
    a, b = data / "out" / "sat1.instance.json", data / "out" / "sat2.instance.json"

    code, out, _ = run(capsys, "diff", a, b)
    assert code == 0 and "+ FMECA" in out and "- " not in out

    code, out, _ = run(capsys, "metrics", line, a, b, "--format", "json")
    report = json.loads(out)
    assert (report["commonality_fraction"], report["savings"]) == ("62/65", 124)


def test_instantiate_with_demands(capsys, data):
    line = build(capsys, data)
    code, out, _ = run(
        capsys, "instantiate", line, data / "sat1.ctx.json", "--demands", data / "scope.json",
        "--entity", "Sat1", "--entity", "Sat1sub2",
    )
    assert code == 0
    assert json.loads(out)["parameters"] == {"ivv_level": 3, "reviews_per_phase": 1}


def test_entity_without_demands_is_usage_error(capsys, data):
    line = build(capsys, data)
    code, _, _ = run(capsys, "instantiate", line, data / "sat1.ctx.json", "--entity", "Sat1")
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["validate", "{d}/satmodel.json"],
        ["scope", "{d}/projects.csv", "--defs", "{d}/attrs.json", "--mapping", "{d}/mapping.json"],
        ["dot", "{d}/satmodel.json"],
        ["gen-fixture", "--activities", "10", "--artifacts", "8", "--pf-views", "2", "--cf-views", "2", "--out-dir", "{d}/gen"],
    ],
)
def test_json_format_parses(capsys, data, argv):
    code, out, _ = run(capsys, *[a.format(d=data) for a in argv], "--format", "json")
    assert code == 0
    json.loads(out)


def test_json_format_parses_downstream(capsys, data):
    line = build(capsys, data)
    run(capsys, "instantiate", line, data / "sat1.ctx.json", data / "sat2.ctx.json", "--out-dir", data / "out")
    a, b = data / "out" / "sat1.instance.json", data / "out" / "sat2.instance.json"
    for argv in (["diff", a, b], ["metrics", line, a, b], ["build-line", data / "satmodel.json", data / "scope.json", data / "satline.rules", data / "binding.json", "--defs", data / "attrs.json"]):
        code, out, _ = run(capsys, *argv, "--format", "json")
        assert code == 0
        json.loads(out)


def test_gen_fixture_is_reproducible(capsys, tmp_path):
    for name in ("one", "two"):
        assert run(capsys, "gen-fixture", "--seed", "5", "--out-dir", tmp_path / name)[0] == 0
    for f in ("line.json", "sat1.ctx.json", "sat2.ctx.json"):
        assert (tmp_path / "one" / f).read_bytes() == (tmp_path / "two" / f).read_bytes()


def test_gen_fixture_text_summary(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-fixture", "--out-dir", tmp_path)
    assert code == 0 and out.startswith("76/54/18/18")


def test_dot_output(capsys, data):
    line = build(capsys, data)
    code, out, _ = run(capsys, "dot", line)
    assert code == 0
    assert out.count("digraph") == 7
    assert "[Opt1]" in out


def test_bad_threshold(capsys, data):
    with pytest.raises(SystemExit) as exc:
        main(["scope", *map(str, scope_args(data)), "--threshold", "lots"])
    assert exc.value.code == 2
