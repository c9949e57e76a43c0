"""Command-line entry points.

Exit codes: 0 success, 1 pipeline failed, 2 configuration or usage error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import EngineConfig, load_config
from .policy import Phase

logger = logging.getLogger(__name__)


class ConfigError(click.ClickException):
    exit_code = 2


def _load(config_path: str | None, mock: bool | None, seed: int | None) -> EngineConfig:
    try:
        config = load_config(config_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    if mock is not None:
        config.mock_mode = mock
    if seed is not None:
        config.seed = seed
    return config


@click.group()
def main() -> None:
    """Compositional text-to-image orchestration engine."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--prompt", required=True, help="Text prompt to generate from.")
@click.option("--mock/--no-mock", default=None, help="Force mock tool mode on or off.")
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--mode", type=click.Choice(["auto", "llm_decompose", "rule_decompose"]), default="auto")
def run(prompt: str, mock: bool | None, seed: int | None, config_path: str | None,
        out_dir: str | None, mode: str) -> None:
    """Run one prompt through the pipeline and report the outcome."""
    from .engine import Engine

    config = _load(config_path, mock, seed)
    engine = Engine(config)
    try:
        session = engine.create_session(prompt, mode=mode)
        session = engine.advance(session.id)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    click.echo(f"session: {session.id}")
    click.echo(f"category: {session.analysis.category.value}")
    click.echo(f"phase: {session.state.phase.value}")
    if session.layout:
        click.echo(session.layout.to_text().rstrip())
    if out_dir:
        manifest = engine.export_artifacts(session.id, out_dir)
        click.echo(f"exported {len(manifest['artifacts'])} artifacts to {out_dir}")
    if session.state.phase is not Phase.DONE:
        click.echo(f"pipeline did not finish: {session.state.phase.value}", err=True)
        sys.exit(1)


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Built frontend directory to serve at /ui.")
def serve(port: int, host: str, config_path: str | None, ui_dir: str | None) -> None:
    """Serve the session REST API (and optionally the feedback UI)."""
    import uvicorn

    from .api import create_api
    from .engine import Engine

    config = _load(config_path, None, None)
    uvicorn.run(create_api(Engine(config), ui_dir=ui_dir), host=host, port=port)


@main.command(name="eval")
@click.option("--prompts", "prompt_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--mock/--no-mock", default=None)
@click.option("--seed", type=int, default=None)
def eval_command(prompt_file: str, config_path: str | None, out_dir: str,
                 mock: bool | None, seed: int | None) -> None:
    """Run a prompt suite and write images, rows, and the aggregate report."""
    from .evaluation import run_suite

    config = _load(config_path, mock, seed)
    report = run_suite(prompt_file, config, out_dir)
    click.echo(json.dumps({k: v for k, v in report.to_dict().items() if k != "rows"}, indent=2))
    failed = [row for row in report.rows if row.status != "ok"]
    if failed:
        click.echo(f"{len(failed)} prompt(s) failed", err=True)
        sys.exit(1)


@main.group()
def layout() -> None:
    """Plan or validate scene layouts."""


@layout.command(name="plan")
@click.option("--in", "in_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="File containing one prompt per line.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), default=None)
def layout_plan(in_file: str, seed: int, out_file: str | None) -> None:
    """Plan layouts for the prompts in a file."""
    from .analysis import decompose_rule_based
    from .errors import LayoutInfeasible, UnparseablePrompt
    from .layout import plan_layout

    outputs = []
    for line in Path(in_file).read_text(encoding="utf-8").splitlines():
        prompt = line.strip()
        if not prompt or prompt.startswith("#"):
            continue
        try:
            planned = plan_layout(decompose_rule_based(prompt), seed)
        except (UnparseablePrompt, LayoutInfeasible) as exc:
            click.echo(f"cannot plan {prompt!r}: {exc}", err=True)
            sys.exit(1)
        outputs.append(f"# {prompt}\n{planned.to_text()}")
    text = "\n".join(outputs)
    if out_file:
        Path(out_file).write_text(text, encoding="utf-8")
    else:
        click.echo(text.rstrip())


@layout.command(name="validate")
@click.option("--in", "in_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Layout file: canvas line plus 'caption | instance | x y w h' lines.")
def layout_validate(in_file: str) -> None:
    """Validate a layout file; non-clean layouts exit 1."""
    from .layout import SceneLayout, validate

    try:
        scene = SceneLayout.from_text(Path(in_file).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    report = validate(scene)
    click.echo(json.dumps(report.to_dict(), indent=2))
    if not report.clean:
        sys.exit(1)


if __name__ == "__main__":
    main()
