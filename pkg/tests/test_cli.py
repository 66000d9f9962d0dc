import json

import pytest
from click.testing import CliRunner

from conftest import full_plan
from reverie.cli import main
from reverie.scenarios import scenario_to_dict, synthetic_scenario


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def no_live_env(monkeypatch):
    monkeypatch.delenv("REVERIE_API_URL", raising=False)
    monkeypatch.delenv("REVERIE_API_KEY", raising=False)


def write_plan(path, plan):
    data = []
    for entry in plan:
        item = {"component": entry.component, "turn": entry.turn_index}
        if entry.response is not None:
            item["response"] = entry.response
        if entry.error_kind is not None:
            item["error"] = {"kind": entry.error_kind}
        data.append(item)
    path.write_text(json.dumps(data))


def write_scenarios(directory, count=2):
    directory.mkdir(exist_ok=True)
    for i in range(count):
        payload = scenario_to_dict(synthetic_scenario(i))
        (directory / f"scenario-{i}.json").write_text(json.dumps(payload))


class TestChat:
    def test_scripted_transcript_deterministic(self, runner, tmp_path):
        plan_path = tmp_path / "plan.json"
        write_plan(plan_path, full_plan(2))
        outputs = []
        for _ in range(2):
            result = runner.invoke(
                main,
                ["chat", "--scripted", str(plan_path)],
                input="first message\nsecond message\n/quit\n",
            )
            assert result.exit_code == 0, result.output
            # Drop the banner line: the session id is random, the rest is not.
            outputs.append(result.output.split("\n", 1)[1])
        assert outputs[0] == outputs[1]
        assert "agent> assistant reply 0" in outputs[0]
        assert "agent> assistant reply 1" in outputs[0]

    def test_show_internal_prints_narrative(self, runner, tmp_path):
        plan_path = tmp_path / "plan.json"
        write_plan(plan_path, full_plan(1))
        result = runner.invoke(
            main,
            ["chat", "--scripted", str(plan_path), "--show-internal"],
            input="hello\n/quit\n",
        )
        assert result.exit_code == 0, result.output
        assert "[narrative] narrative after turn 0" in result.output
        assert "[goal] goal after turn 0" in result.output

    def test_base_variant_prints_no_reflection(self, runner, tmp_path):
        plan_path = tmp_path / "plan.json"
        write_plan(plan_path, full_plan(1))
        result = runner.invoke(
            main,
            ["chat", "--scripted", str(plan_path), "--variant", "base",
             "--show-internal"],
            input="hello\n/quit\n",
        )
        assert result.exit_code == 0, result.output
        assert "[narrative]" not in result.output
        assert "[goal]" not in result.output

    def test_missing_api_key_exits_2(self, runner, no_live_env):
        result = runner.invoke(main, ["chat"], input="hi\n")
        assert result.exit_code == 2
        assert "REVERIE_API_URL" in result.output


class TestEval:
    def test_matrix_writes_reports(self, runner, tmp_path):
        scen_dir = tmp_path / "scenarios"
        write_scenarios(scen_dir, count=2)
        out_dir = tmp_path / "out"
        result = runner.invoke(
            main,
            ["eval", "--scenarios", str(scen_dir), "--variants", "full,base",
             "--out", str(out_dir), "--resamples", "50"],
        )
        assert result.exit_code == 0, result.output
        results = json.loads((out_dir / "results.json").read_text())
        assert results["n_scored"] == 4
        csv_lines = (out_dir / "records.csv").read_text().strip().splitlines()
        assert len(csv_lines) == 1 + 4
        report = (out_dir / "report.md").read_text()
        assert "Relative improvement" in report
        assert "| full |" in report

    def test_unknown_variant_usage_error(self, runner, tmp_path):
        scen_dir = tmp_path / "scenarios"
        write_scenarios(scen_dir, count=1)
        result = runner.invoke(
            main, ["eval", "--scenarios", str(scen_dir), "--variants", "spicy"]
        )
        assert result.exit_code == 2

    def test_empty_dir_usage_error(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(main, ["eval", "--scenarios", str(empty)])
        assert result.exit_code == 2

    def test_malformed_scenario_skipped_unless_strict(self, runner, tmp_path):
        scen_dir = tmp_path / "scenarios"
        write_scenarios(scen_dir, count=1)
        (scen_dir / "broken.json").write_text("{not json")
        out_dir = tmp_path / "out"
        ok = runner.invoke(
            main,
            ["eval", "--scenarios", str(scen_dir), "--out", str(out_dir),
             "--resamples", "10"],
        )
        assert ok.exit_code == 0, ok.output
        strict = runner.invoke(
            main, ["eval", "--scenarios", str(scen_dir), "--strict"]
        )
        assert strict.exit_code == 1


class TestSimulate:
    def test_seeded_determinism(self, runner, tmp_path):
        delays = tmp_path / "delays.json"
        delays.write_text(
            json.dumps({"introduction": 2.32, "distractor": 2.35, "critical": 3.27})
        )
        outputs = []
        for _ in range(2):
            result = runner.invoke(
                main,
                ["simulate", "--n", "3", "--seed", "7", "--delays", str(delays)],
            )
            assert result.exit_code == 0, result.output
            outputs.append(result.output)
        assert outputs[0] == outputs[1]
        assert "15 turns" in outputs[0]
        assert "Time allocation" in outputs[0]

    def test_report_file_written(self, runner, tmp_path):
        out = tmp_path / "report.json"
        result = runner.invoke(
            main, ["simulate", "--n", "1", "--seed", "0", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text())
        assert len(data["turns"]) == 5

    def test_zero_wpm_usage_error(self, runner):
        result = runner.invoke(main, ["simulate", "--n", "1", "--typing-wpm", "0"])
        assert result.exit_code == 2

    def test_nonpositive_n_usage_error(self, runner):
        result = runner.invoke(main, ["simulate", "--n", "0"])
        assert result.exit_code == 2


class TestServe:
    def test_help_lists_options(self, runner):
        result = runner.invoke(main, ["serve", "--help"])
        assert result.exit_code == 0
        assert "--port" in result.output
        assert "--static-dir" in result.output
