import json
import os

import pytest
from click.testing import CliRunner

from src.cli.main import cli, parse_pairs


@pytest.fixture
def runner():
    return CliRunner()


def test_validate_bundled_portrait(runner):
    result = runner.invoke(cli, ["portrait", "validate", "two-fixed"])
    assert result.exit_code == 0
    assert json.loads(result.output)["valid"] is True


def test_validate_reports_Y_violation(runner):
    result = runner.invoke(cli, ["portrait", "validate", "bad-periodic", "--format", "text"])
    assert result.exit_code == 1
    assert result.output.startswith("invalid")
    assert "p1" in result.output


def test_parse_error_exits_with_2(runner, tmp_path):
    path = tmp_path / "broken.portrait"
    path.write_text("critical c1 deg=2\nmap c1 => c1\n")
    result = runner.invoke(cli, ["portrait", "validate", str(path)])
    assert result.exit_code == 2
    assert "line 2" in result.output


def test_portrait_from_stdin(runner):
    text = "critical c1 deg=2\ncritical c2 deg=2\nmap c1 -> c2\nmap c2 -> c1\n"
    result = runner.invoke(cli, ["model", "-"], input=text)
    assert result.exit_code == 0
    assert result.output.strip() == "a=(b,1,1)(1 2); b=(1,1,a)(2 3); r=0"


def test_model_of_a_bundled_portrait(runner):
    result = runner.invoke(cli, ["model", "two-fixed"])
    assert result.output.strip() == "a=(a,1,1)(1 2); b=(1,1,b)(2 3); r=0"


def test_model_of_a_family(runner):
    result = runner.invoke(cli, ["model", "--family", "1,1,a"])
    assert result.exit_code == 0
    assert result.output.strip() == "a1=(1 2); a2=(a1,a2,1)"
    assert runner.invoke(cli, ["model", "--family", "1,1,z"]).exit_code == 2
    assert runner.invoke(cli, ["model"]).exit_code == 2


def test_portrait_dot(runner):
    result = runner.invoke(cli, ["portrait", "dot", "period-two"])
    assert result.exit_code == 0
    assert "digraph portrait {" in result.output
    assert "// portrait: map c1 -> c2" in result.output


def test_verify_counterexample_text(runner):
    result = runner.invoke(cli, ["verify", "counterexample", "--format", "text"])
    assert result.exit_code == 0
    assert result.output.startswith("counterexample (n=1) seed=0: pass")


def test_verify_torsion_json(runner):
    result = runner.invoke(cli, ["verify", "torsion", "--m", "1", "--n3", "1"])
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["verdict"] == "pass"
    assert report["levels"][0]["details"]["order"] == "6"


def test_verify_saves_the_report(runner, tmp_path):
    out = tmp_path / "reports"
    result = runner.invoke(
        cli, ["verify", "branch", "--level", "2", "--out", str(out), "--timings"]
    )
    assert result.exit_code == 0
    saved = json.loads((out / "branch_seed0.json").read_text())
    assert saved["verdict"] == "pass"
    assert "elapsed_ms" in saved


def test_verify_level_above_cap(runner):
    result = runner.invoke(cli, ["verify", "branch", "--level", "9"])
    assert result.exit_code == 4


def test_verify_level_cap_from_environment(runner, monkeypatch):
    monkeypatch.setenv("TREEMONO_GROUP_LEVEL_CAP", "1")
    result = runner.invoke(cli, ["verify", "branch", "--level", "2"])
    assert result.exit_code == 4


def test_verify_filtration_needs_both_sides(runner):
    result = runner.invoke(cli, ["verify", "filtration", "--sub", "0,1:0,1"])
    assert result.exit_code == 2


def test_verify_filtration(runner):
    result = runner.invoke(
        cli, ["verify", "filtration", "--sub", "0,1:0,1", "--sup", "0,2:0,1", "--level", "2", "--format", "text"]
    )
    assert result.exit_code == 0
    assert "strict=True" in result.output


def test_unknown_theorem(runner):
    assert runner.invoke(cli, ["verify", "everything"]).exit_code == 2


def test_parse_pairs():
    assert parse_pairs("0,1:2,3") == [(0, 1), (2, 3)]
    assert parse_pairs(None) is None
    with pytest.raises(Exception):
        parse_pairs("0,1")
