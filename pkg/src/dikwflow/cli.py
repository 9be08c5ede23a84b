"""Command line for the pipeline: ingest, simulate, run, review, export, serve.

Thin by the same rule as the HTTP API: each command maps onto engine or
module calls and formats the result. Errors exit with a per-class code so
scripts can branch on them:

    2 ValidationFailed, 3 NotFound, 4 InvalidState, 5 Internal
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any

import click

from .artifacts import ReviewActionKind, parse_topic
from .dataset import DatasetError, builtin_catalog, fingerprint, ingest
from .orchestrator import (
    Engine,
    InvalidState,
    OrchestratorError,
    RunConfig,
    UnknownTopic,
)
from .simulator import default_demographics, generate, model_from_catalog
from .wisdom_agent import candidates_markdown

EXIT_CODES = {"ValidationFailed": 2, "NotFound": 3, "InvalidState": 4, "Internal": 5}


def _fail(code: str, message: str, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps({"code": code, "message": message}, sort_keys=True))
    else:
        click.echo(f"error ({code}): {message}", err=True)
    sys.exit(EXIT_CODES[code])


def _emit(payload: Any, as_json: bool, plain: str | None = None) -> None:
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))
    elif plain is not None:
        click.echo(plain)


def _load_engine(runs_root: str, store_root: str, run_id: str, as_json: bool) -> Engine:
    try:
        return Engine.load(runs_root, store_root, run_id)
    except UnknownTopic:
        _fail("NotFound", f"no run named {run_id!r} under {runs_root}", as_json)
    except OrchestratorError as exc:
        _fail("ValidationFailed", str(exc), as_json)


root_options = [
    click.option("--runs-root", default="runs", show_default=True, help="run state directory"),
    click.option("--store-root", default="store", show_default=True, help="artifact store directory"),
]


def with_roots(command):
    for option in reversed(root_options):
        command = option(command)
    return command


@click.group()
def main() -> None:
    """Experiment-to-message pipeline over a layered topic graph."""


@main.command(name="ingest")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def ingest_cmd(dataset: str, as_json: bool) -> None:
    """Validate a CSV dataset and print its fingerprint."""
    try:
        table = ingest(dataset)
    except DatasetError as exc:
        _fail("ValidationFailed", str(exc), as_json)
    fp = fingerprint(table)
    payload = {
        "fingerprint": fp.digest,
        "rows": table.row_count,
        "columns": list(table.column_names),
    }
    _emit(payload, as_json, f"{fp.digest}  rows={table.row_count} columns={len(table.column_names)}")


@main.command()
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--rows", default=50_000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--catalog", "catalog_ref", default="stage1", show_default=True)
@click.option(
    "--effect",
    "effects",
    multiple=True,
    help="planted strategy effect as TAG=LOGIT_DELTA; repeatable",
)
@click.option("--json", "as_json", is_flag=True)
def simulate(out: str, rows: int, seed: int, catalog_ref: str, effects: tuple[str, ...], as_json: bool) -> None:
    """Generate a synthetic encounter dataset with known planted effects."""
    planted: dict[str, float] = {}
    for item in effects:
        if "=" not in item:
            _fail("ValidationFailed", f"--effect expects TAG=DELTA, got {item!r}", as_json)
        tag, _, delta = item.partition("=")
        try:
            planted[tag.strip()] = float(delta)
        except ValueError:
            _fail("ValidationFailed", f"effect delta must be a number, got {delta!r}", as_json)
    catalog = builtin_catalog(catalog_ref)
    model = model_from_catalog(catalog, strategy_effects=planted or None, seed=seed)
    table = generate(model, rows, default_demographics())
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    fp = fingerprint(table)
    _emit(
        {"out": out, "rows": rows, "fingerprint": fp.digest},
        as_json,
        f"wrote {rows} rows to {out} ({fp.digest[:12]})",
    )


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--catalog", "catalog_ref", default="stage1", show_default=True)
@click.option("--seeds", "seeds_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--run-id", default=None)
@click.option("--max-parallelism", default=4, show_default=True)
@click.option("--auto-approve", is_flag=True, help="approve every gate (CI mode)")
@click.option("--json", "as_json", is_flag=True)
@with_roots
def run(
    dataset: str,
    catalog_ref: str,
    seeds_path: str,
    run_id: str | None,
    max_parallelism: int,
    auto_approve: bool,
    as_json: bool,
    runs_root: str,
    store_root: str,
) -> None:
    """Submit a run and drive it until done or waiting on review."""
    try:
        raw = json.loads(Path(seeds_path).read_text(encoding="utf-8"))
        wires = raw["seeds"] if isinstance(raw, dict) else raw
        seeds = tuple(parse_topic(w) for w in wires)
        config = RunConfig(
            dataset_path=dataset,
            catalog_ref=catalog_ref,
            seeds=seeds,
            max_parallelism=max_parallelism,
        )
        engine = Engine(runs_root, store_root, config, run_id=run_id)
    except (OrchestratorError, ValueError, KeyError) as exc:
        _fail("ValidationFailed", str(exc), as_json)
    snapshot = engine.run(auto_approver="auto-approve" if auto_approve else None)
    counts = ", ".join(f"{k}={v}" for k, v in sorted(snapshot["status_counts"].items()))
    _emit(
        {"run_id": engine.run_id, "snapshot": snapshot},
        as_json,
        f"run {engine.run_id}: {counts}",
    )


@main.group()
def topics() -> None:
    """Inspect a run's topic states."""


@topics.command(name="ls")
@click.option("--run", "run_id", required=True)
@click.option("--status", default=None, help="filter by status value")
@click.option("--json", "as_json", is_flag=True)
@with_roots
def topics_ls(run_id: str, status: str | None, as_json: bool, runs_root: str, store_root: str) -> None:
    engine = _load_engine(runs_root, store_root, run_id, as_json)
    rows = [
        t
        for t in engine.snapshot()["topics"]
        if status is None or t["status"] == status.lower()
    ]
    if as_json:
        _emit({"run_id": run_id, "topics": rows}, True)
        return
    for t in rows:
        click.echo(f"{t['status']:<18} {t['key']}  {t['summary']}")


@main.command()
@click.argument("topic_hash")
@click.option("--run", "run_id", required=True)
@click.option("--approve", "action", flag_value="approve")
@click.option("--reject", "action", flag_value="reject")
@click.option("--edit", "edit_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--actor", default="cli", show_default=True)
@click.option("--comment", default="")
@click.option("--candidate", default=None, help="portfolio message name for candidate review")
@click.option("--json", "as_json", is_flag=True)
@with_roots
def review(
    topic_hash: str,
    run_id: str,
    action: str | None,
    edit_path: str | None,
    actor: str,
    comment: str,
    candidate: str | None,
    as_json: bool,
    runs_root: str,
    store_root: str,
) -> None:
    """Approve, reject, or edit one topic (or one portfolio message)."""
    if edit_path is not None:
        action = "edit"
    if action is None:
        _fail("ValidationFailed", "pass one of --approve, --reject, or --edit FILE", as_json)
    engine = _load_engine(runs_root, store_root, run_id, as_json)
    record = engine.find_record_by_hash(topic_hash)
    if record is None:
        _fail("NotFound", f"run {run_id!r} has no topic {topic_hash!r}", as_json)
    new_body = None
    if edit_path is not None:
        try:
            new_body = json.loads(Path(edit_path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            _fail("ValidationFailed", f"cannot read edit file: {exc}", as_json)
    try:
        engine.review_action(
            record.topic_id,
            ReviewActionKind(action),
            actor=actor,
            comment=comment,
            new_body=new_body,
            candidate=candidate,
        )
    except InvalidState as exc:
        _fail("InvalidState", str(exc), as_json)
    except UnknownTopic as exc:
        _fail("NotFound", str(exc), as_json)
    except ValueError as exc:
        _fail("ValidationFailed", str(exc), as_json)
    engine.run()
    refreshed = engine.records[record.topic_id.key]
    _emit(
        {"run_id": run_id, "topic": engine.topic_detail(refreshed)},
        as_json,
        f"{refreshed.topic_id.key}: {refreshed.status.value}",
    )


@main.group()
def export() -> None:
    """Write run outputs to files."""


@export.command(name="portfolio")
@click.option("--run", "run_id", required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "md"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="default: stdout")
@click.option("--json", "as_json", is_flag=True)
@with_roots
def export_portfolio(
    run_id: str,
    fmt: str,
    out: str | None,
    as_json: bool,
    runs_root: str,
    store_root: str,
) -> None:
    engine = _load_engine(runs_root, store_root, run_id, as_json)
    portfolios = engine.portfolios()
    if not portfolios:
        _fail("NotFound", f"run {run_id!r} has no resolved portfolio", as_json)
    if fmt == "json":
        body = json.dumps(portfolios, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    else:
        sections = []
        for p in portfolios:
            sections.append(f"## {p['objective']}\n\n" + candidates_markdown(p["candidates"]))
        body = "\n\n".join(sections) + "\n"
    if out is None:
        click.echo(body, nl=False)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(body, encoding="utf-8")
        _emit({"out": out, "format": fmt}, as_json, f"wrote {fmt} portfolio to {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
@click.option(
    "--static",
    "static_dir",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="also serve a built console bundle under /ui",
)
@with_roots
def serve(host: str, port: int, runs_root: str, store_root: str, static_dir: str | None) -> None:
    """Serve the HTTP API for the review console."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(runs_root, store_root, static_dir=static_dir), host=host, port=port)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="default: stdout")
def schema(out: str | None) -> None:
    """Dump the machine-readable API description (OpenAPI JSON)."""
    from .api import create_app

    spec = create_app("runs", "store").openapi()
    body = json.dumps(spec, indent=2, sort_keys=True) + "\n"
    if out is None:
        click.echo(body, nl=False)
    else:
        Path(out).write_text(body, encoding="utf-8")
        click.echo(f"wrote API description to {out}")


if __name__ == "__main__":
    main()
