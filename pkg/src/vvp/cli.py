"""Command line front end: validate, paths, metrics, analyze, export, serve.

Exit codes: 0 success, 1 domain error (validation failures, corrupt logs,
samples too small), 2 usage or syntax errors. Every flag can also be set via
a VVP_-prefixed environment variable (e.g. VVP_PORT, VVP_ALPHA).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import analytics
from .graph import enumerate_branch_paths, validate_graph
from .project_io import (
    PROJECT_FILE_EXTENSION,
    ProjectSyntaxError,
    UnsupportedVersion,
    parse_project,
)
from .session import LOG_FILE_EXTENSION, CorruptLog, log_from_bytes, session_metrics
from .stats import SampleTooSmall

EXIT_DOMAIN_ERROR = 1
EXIT_SYNTAX_ERROR = 2


def _load_project(path: Path):
    try:
        return parse_project(path.read_bytes())
    except (ProjectSyntaxError, UnsupportedVersion) as exc:
        click.echo(f"error: {path}: {exc}", err=True)
        sys.exit(EXIT_SYNTAX_ERROR)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SYNTAX_ERROR)


def _load_valid_project(path: Path):
    project = _load_project(path)
    report = project.validation
    if report is not None and not report.ok:
        for issue in report.errors:
            click.echo(f"error: {issue.code.value}: {issue.node or '-'}: {issue.detail}", err=True)
        sys.exit(EXIT_DOMAIN_ERROR)
    return project


def _find_project_file(directory: Path) -> Path:
    candidates = sorted(directory.glob(f"*{PROJECT_FILE_EXTENSION}"))
    if not candidates:
        click.echo(f"error: no {PROJECT_FILE_EXTENSION} file in {directory}", err=True)
        sys.exit(EXIT_DOMAIN_ERROR)
    return candidates[0]


def _load_logs(directory: Path) -> list[tuple[Path, list]]:
    paths = sorted(directory.glob(f"*{LOG_FILE_EXTENSION}")) + sorted(
        directory.glob(f"sessions/*{LOG_FILE_EXTENSION}")
    )
    logs = []
    for path in paths:
        try:
            logs.append((path, log_from_bytes(path.read_bytes())))
        except CorruptLog as exc:
            click.echo(f"error: {path}: {exc}", err=True)
            sys.exit(EXIT_DOMAIN_ERROR)
    return logs


@click.group(context_settings={"auto_envvar_prefix": "VVP"})
def main() -> None:
    """Interactive vision video toolkit."""


@main.command()
@click.argument("project_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def validate(project_path: Path) -> None:
    """Check a project file; exit 0 only when it is playable."""
    project = _load_project(project_path)
    report = project.validation or validate_graph(project)
    for issue in report.errors:
        click.echo(f"error: {issue.code.value}: {issue.node or '-'}: {issue.detail}")
    for issue in report.warnings:
        click.echo(f"warning: {issue.code.value}: {issue.node or '-'}: {issue.detail}")
    if report.errors:
        click.echo(f"{len(report.errors)} error(s)")
        sys.exit(EXIT_DOMAIN_ERROR)
    click.echo("ok")


@main.command()
@click.argument("project_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def paths(project_path: Path) -> None:
    """List branch paths and the minimum choices per playthrough."""
    project = _load_valid_project(project_path)
    inventory = enumerate_branch_paths(project)
    for path in inventory.paths:
        chain = " -> ".join(path.nodes) if path.nodes else "(empty)"
        click.echo(f"{path.fork} / {path.option_id} [{path.label}]: {chain}")
    click.echo(
        f"{len(inventory.paths)} branch paths, minimum {inventory.minimum_per_playthrough} per playthrough"
    )


@main.command()
@click.argument("log_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--project", "project_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--format", "output_format", type=click.Choice(["text", "structured"]),
              default="text", show_default=True)
def metrics(log_path: Path, project_path: Path, output_format: str) -> None:
    """Compute one session's metrics from its log."""
    project = _load_valid_project(project_path)
    try:
        events = log_from_bytes(log_path.read_bytes())
        result = session_metrics(events, project)
    except CorruptLog as exc:
        click.echo(f"error: {log_path}: {exc}", err=True)
        sys.exit(EXIT_DOMAIN_ERROR)
    if output_format == "structured":
        click.echo(json.dumps(result.__dict__, indent=2, sort_keys=True))
        return
    click.echo(f"correct answers:       {result.correct_answers} of {result.questions_available}")
    click.echo(f"time spent:            {result.time_spent_ms} ms")
    click.echo(f"active watching time:  {result.active_time_ms} ms")
    click.echo(f"optional interactions: {result.optional_interactions}")
    click.echo(f"branch paths seen:     {result.branch_paths_seen}")
    click.echo(f"comments:              {result.comments}")


@main.command()
@click.argument("group_a_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("group_b_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--alpha", type=float, default=0.05, show_default=True, envvar="VVP_ALPHA")
@click.option("--format", "output_format", type=click.Choice(["text", "structured"]),
              default="text", show_default=True, envvar="VVP_OUTPUT_FORMAT")
def analyze(group_a_dir: Path, group_b_dir: Path, alpha: float, output_format: str) -> None:
    """Compare two groups of session logs, one directory per group."""
    if not 0.0 < alpha < 1.0:
        click.echo("error: alpha must be in (0, 1)", err=True)
        sys.exit(EXIT_SYNTAX_ERROR)
    project = _load_valid_project(_find_project_file(group_a_dir))

    def group_metrics(directory: Path):
        rows = []
        for path, events in _load_logs(directory):
            try:
                rows.append(session_metrics(events, project))
            except CorruptLog as exc:
                click.echo(f"error: {path}: {exc}", err=True)
                sys.exit(EXIT_DOMAIN_ERROR)
        return rows

    metrics_a = group_metrics(group_a_dir)
    metrics_b = group_metrics(group_b_dir)
    try:
        report = analytics.compare_groups(metrics_a, metrics_b, alpha=alpha)
    except SampleTooSmall as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN_ERROR)
    if output_format == "structured":
        click.echo(json.dumps(analytics.comparison_to_document(report), indent=2, sort_keys=True))
    else:
        click.echo(render_group_sizes(metrics_a, metrics_b))
        click.echo(analytics.render_comparison_table(report))


def render_group_sizes(metrics_a, metrics_b) -> str:
    return f"group A: {len(metrics_a)} sessions; group B: {len(metrics_b)} sessions"


@main.command()
@click.argument("project_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("-o", "--output", "output_path", required=True, type=click.Path(path_type=Path))
def export(project_dir: Path, output_path: Path) -> None:
    """Bundle a project directory's session logs into a .vvx document."""
    project = _load_valid_project(_find_project_file(project_dir))
    logs = [events for _, events in _load_logs(project_dir)]
    try:
        bundle = analytics.export_bundle(logs, project)
    except CorruptLog as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN_ERROR)
    output_path.write_bytes(bundle)
    click.echo(f"wrote {output_path} ({len(logs)} sessions)")


@main.command()
@click.option("--port", type=int, default=8321, show_default=True, envvar="VVP_PORT")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="VVP_HOST")
@click.option("--data-dir", "data_dir", type=click.Path(path_type=Path), default=Path("data"),
              show_default=True, envvar="VVP_DATA_DIR")
def serve(port: int, host: str, data_dir: Path) -> None:
    """Run the HTTP service over a data directory."""
    if not data_dir.is_dir():
        click.echo(f"error: data directory {data_dir} does not exist", err=True)
        sys.exit(EXIT_DOMAIN_ERROR)
    import uvicorn

    from .server import create_app

    app = create_app(data_dir)
    click.echo(f"serving {data_dir} on http://{host}:{port}")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        click.echo(f"error: could not serve: {exc}", err=True)
        sys.exit(EXIT_DOMAIN_ERROR)


if __name__ == "__main__":
    main()
