import copy
import json

import pytest
from click.testing import CliRunner

import support
from dcc.cli import EXIT_AUDIT, EXIT_INVALID, main
from dcc.eventlog import write_events
from test_econ import PRISONERS

SCENARIO = """\
seed: 3
epochs: 12
agents: {honest-creator: 2, plagiarist: 1, diligent-investor: 1, honest-reporter: 1}
projects: [{every: 4, target: 60}]
"""


@pytest.fixture
def cli():
    return CliRunner()


@pytest.fixture
def log_file(tmp_path):
    path = tmp_path / "tour.jsonl"
    write_events(path, support.tour().events)
    return path


def test_run_then_replay_and_verify(cli, tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(SCENARIO)
    res = cli.invoke(main, ["run", str(cfg), "--out", str(tmp_path / "out")])
    assert res.exit_code == 0, res.output
    final = res.output.strip()
    log = tmp_path / "out" / "events.jsonl"
    assert json.loads((tmp_path / "out" / "report.json").read_text())["final_state_hash"] == final
    assert cli.invoke(main, ["replay", str(log)]).output.strip() == final
    out = cli.invoke(main, ["verify", str(log), "--replay"])
    assert out.exit_code == 0 and out.output.strip().endswith(f"0 violations, final {final}")


def test_run_rejects_bad_config(cli, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("seed: 1\nepochs: 2\nextra: true\n")
    assert cli.invoke(main, ["run", str(cfg), "--out", str(tmp_path / "o")]).exit_code == EXIT_INVALID
    assert cli.invoke(main, ["run", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]).exit_code == EXIT_INVALID


def test_run_reports_unwritable_output(cli, tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(SCENARIO)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.invoke(main, ["run", str(cfg), "--out", str(blocker / "sub")]).exit_code == EXIT_INVALID


def test_verify_flags_a_forged_log(cli, tmp_path):
    events = copy.deepcopy(support.tour().events)
    events[-1]["payload"]["effects"].append(["acct:alice", "labor", 5])
    path = tmp_path / "forged.jsonl"
    write_events(path, events)
    res = cli.invoke(main, ["verify", str(path)])
    assert res.exit_code == EXIT_AUDIT and "[conservation]" in res.output
    assert cli.invoke(main, ["replay", str(path)]).exit_code == EXIT_AUDIT


def test_unparseable_log_is_an_audit_failure(cli, tmp_path):
    path = tmp_path / "junk.jsonl"
    path.write_text("not json\n")
    assert cli.invoke(main, ["verify", str(path)]).exit_code == EXIT_AUDIT
    assert cli.invoke(main, ["replay", str(tmp_path / "absent.jsonl")]).exit_code == EXIT_INVALID


def test_nash_output(cli, tmp_path):
    path = tmp_path / "m.txt"
    path.write_text(PRISONERS)
    res = cli.invoke(main, ["nash", str(path)])
    lines = res.output.splitlines()
    assert res.exit_code == 0
    assert lines[0] == "nash: NNN"
    assert "III: L -> NII gains 1" in lines and "NNN: no profitable deviation" in lines
    path.write_text("III 1 2\n")
    bad = cli.invoke(main, ["nash", str(path)])
    assert bad.exit_code == EXIT_INVALID and "line 1" in bad.output


@pytest.mark.parametrize("kind, header", [
    ("metrics", "epoch,token_supply"), ("credit", "epoch,subject,score,cause"),
    ("settlements", "epoch,project,outcome"), ("assembly", "epoch,seat,role,holder"),
])
def test_report_kinds(cli, log_file, kind, header):
    res = cli.invoke(main, ["report", str(log_file), "--kind", kind])
    assert res.exit_code == 0 and res.output.startswith(header) and len(res.output.splitlines()) > 1


def test_unknown_report_kind(cli, log_file):
    assert cli.invoke(main, ["report", str(log_file), "--kind", "vibes"]).exit_code == EXIT_INVALID
