"""CLI surface: run, eval, layout plan/validate, exit codes."""

import json

import pytest
from click.testing import CliRunner

from scenesmith.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def base_args(tmp_path, extra):
    config = tmp_path / "config.yaml"
    config.write_text(f"storage_root: {tmp_path / 'sessions'}\nseed: 3\n", encoding="utf-8")
    return ["--config", str(config)] + extra


class TestRun:
    def test_successful_run(self, runner, tmp_path):
        out_dir = tmp_path / "out"
        result = runner.invoke(
            main,
            ["run", "--prompt", "a blue horse and a brown vase", "--mode", "rule_decompose",
             "--out", str(out_dir)]
            + base_args(tmp_path, []),
        )
        assert result.exit_code == 0, result.output
        assert "phase: done" in result.output
        assert (out_dir / "manifest.json").exists()

    def test_missing_prompt_usage_error(self, runner):
        result = runner.invoke(main, ["run"])
        assert result.exit_code == 2

    def test_blank_prompt_config_error(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--prompt", "  "] + base_args(tmp_path, []))
        assert result.exit_code == 2

    def test_bad_config_file(self, runner, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("- not\n- a\n- mapping\n", encoding="utf-8")
        result = runner.invoke(main, ["run", "--prompt", "a horse", "--config", str(bad)])
        assert result.exit_code == 2


class TestEval:
    def test_eval_writes_report(self, runner, tmp_path):
        prompts = tmp_path / "prompts.txt"
        prompts.write_text("a blue horse and a brown vase\na horse\n", encoding="utf-8")
        out_dir = tmp_path / "eval_out"
        result = runner.invoke(
            main,
            ["eval", "--prompts", str(prompts), "--out", str(out_dir)] + base_args(tmp_path, []),
        )
        assert result.exit_code == 0, result.output
        report = json.loads((out_dir / "report.json").read_text("utf-8"))
        assert len(report["rows"]) == 2


class TestLayout:
    def test_plan_then_validate(self, runner, tmp_path):
        prompts = tmp_path / "prompts.txt"
        prompts.write_text("a blue horse and a brown vase\n", encoding="utf-8")
        layout_file = tmp_path / "layout.txt"
        plan_result = runner.invoke(
            main, ["layout", "plan", "--in", str(prompts), "--seed", "4", "--out", str(layout_file)]
        )
        assert plan_result.exit_code == 0, plan_result.output
        validate_result = runner.invoke(main, ["layout", "validate", "--in", str(layout_file)])
        assert validate_result.exit_code == 0, validate_result.output
        assert json.loads(validate_result.output)["clean"] is True

    def test_validate_dirty_layout_exits_one(self, runner, tmp_path):
        layout_file = tmp_path / "dirty.txt"
        layout_file.write_text(
            "canvas 512 512\na cat | 0 | 0 0 600 100\n", encoding="utf-8"
        )
        result = runner.invoke(main, ["layout", "validate", "--in", str(layout_file)])
        assert result.exit_code == 1
        assert "out_of_bounds" in result.output
