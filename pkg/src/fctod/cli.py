"""Command-line entry point: ingest / export / run / eval / chat.

Configuration precedence is flag > environment variable > config file >
default; every output artifact records the resolved configuration in a run
header so results stay reproducible.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .backend import HttpBackend, MockBackend
from .db import load_databases
from .export import export_split
from .ingest import (
    CorpusSplit,
    IngestError,
    SPLIT_NAMES,
    convert,
    ingest,
    read_jsonl,
    sample_fewshot,
    write_jsonl,
)
from .metrics import evaluate
from .orchestrator import Dependencies, run_dialogue, run_turn, write_transcript, read_transcript
from .core import DialogueSession
from .prompts import TemplateSet
from .registry import default_registry, load_registry


def _resolve(flag_value, config: dict, key: str, default):
    """flag/env (already merged by click) > config file > default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _registry(schema: Optional[str]):
    return load_registry(schema) if schema else default_registry()


def _templates(template_dir: Optional[str]) -> TemplateSet:
    return TemplateSet.from_dir(template_dir) if template_dir else TemplateSet.bundled()


def _run_header(**kwargs) -> dict:
    return {"tool": "fctod", "version": __version__, "config": kwargs}


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Function-calling task-oriented dialogue toolkit."""


@main.command("ingest")
@click.argument("raw_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--version", "corpus_version", default=None, envvar="FCTOD_CORPUS_VERSION",
              help="Corpus layout version (20/21/22), default 21.")
@click.option("--schema", default=None, envvar="FCTOD_SCHEMA", help="Schema JSON path.")
@click.option("--config", "config_path", default=None, envvar="FCTOD_CONFIG")
def cmd_ingest(raw_dir, out_dir, corpus_version, schema, config_path) -> None:
    """Convert a raw corpus directory into six-role JSONL files per split."""
    config = _load_config(config_path)
    version = _resolve(corpus_version, config, "corpus_version", "21")
    try:
        registry = _registry(_resolve(schema, config, "schema", None))
        splits = ingest(raw_dir, version=version)
        db = load_databases(raw_dir, registry)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        counts = {}
        for name in SPLIT_NAMES:
            dialogues = [convert(raw, registry, db) for raw in getattr(splits, name)]
            write_jsonl(dialogues, out / f"{name}.jsonl")
            counts[name] = len(dialogues)
        (out / "run_header.json").write_text(
            json.dumps(_run_header(command="ingest", raw_dir=str(raw_dir),
                                   version=version, counts=counts), indent=2) + "\n",
            encoding="utf-8",
        )
        click.echo(f"train={counts['train']} dev={counts['dev']} test={counts['test']}")
    except (IngestError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("export")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--fraction", type=float, default=None, envvar="FCTOD_FRACTION")
@click.option("--seed", type=int, default=None, envvar="FCTOD_SEED")
@click.option("--split-name", default="train")
@click.option("--manifest-override", "overrides", multiple=True,
              help="key=value manifest override (repeatable).")
@click.option("--config", "config_path", default=None, envvar="FCTOD_CONFIG")
def cmd_export(corpus, out_dir, fraction, seed, split_name, overrides, config_path) -> None:
    """Export a six-role JSONL corpus (or a few-shot slice) as training data."""
    config = _load_config(config_path)
    fraction = _resolve(fraction, config, "fraction", 1.0)
    seed = _resolve(seed, config, "seed", 13)
    if not (0.0 < fraction <= 1.0):
        click.echo(f"error: fraction must be in (0, 1], got {fraction}", err=True)
        sys.exit(2)
    try:
        split = CorpusSplit(name=split_name, dialogues=read_jsonl(corpus))
        if fraction < 1.0:
            split = sample_fewshot(split, fraction, seed)
        manifest_overrides = {}
        for item in overrides:
            key, _, value = item.partition("=")
            manifest_overrides[key] = json.loads(value)
        report = export_split(split, out_dir, manifest_overrides or None)
        header = _run_header(command="export", corpus=str(corpus), fraction=fraction,
                             seed=seed, samples=report.samples)
        (Path(out_dir) / "run_header.json").write_text(
            json.dumps(header, indent=2) + "\n", encoding="utf-8"
        )
        click.echo(f"samples={report.samples} skipped={len(report.skipped)}")
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _build_backend(backend, endpoint, model, api_key, gold_dialogues, trace):
    if backend == "mock":
        return MockBackend.from_gold(gold_dialogues)
    if not endpoint or not endpoint.startswith(("http://", "https://")):
        raise ValueError(f"invalid HTTP endpoint {endpoint!r}")
    return HttpBackend(endpoint=endpoint, model=model or "default", api_key=api_key or "",
                       trace_path=trace)


@main.command("run")
@click.argument("gold_corpus", type=click.Path(exists=True, dir_okay=False))
@click.argument("db_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock")
@click.option("--endpoint", default=None, envvar="FCTOD_ENDPOINT")
@click.option("--model", default=None, envvar="FCTOD_MODEL")
@click.option("--api-key", default=None, envvar="FCTOD_API_KEY")
@click.option("--mode", type=click.Choice(["policy", "gold_state"]), default="policy")
@click.option("--schema", default=None, envvar="FCTOD_SCHEMA")
@click.option("--template-dir", default=None, envvar="FCTOD_TEMPLATES")
@click.option("--workers", type=int, default=1)
@click.option("--trace", default=None, help="Backend trace JSONL path.")
@click.option("--limit", type=int, default=None, help="Run only the first N dialogues.")
def cmd_run(gold_corpus, db_dir, out_path, backend, endpoint, model, api_key, mode,
            schema, template_dir, workers, trace, limit) -> None:
    """Run the four-stage loop over a gold corpus and write transcripts."""
    try:
        registry = _registry(schema)
        gold = read_jsonl(gold_corpus)
        if limit is not None:
            gold = gold[:limit]
        db = load_databases(db_dir, registry)
        templates = _templates(template_dir)
        backend_obj = _build_backend(backend, endpoint, model, api_key, gold, trace)
        deps = Dependencies(registry=registry, db=db, templates=templates, backend=backend_obj)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                sessions = list(pool.map(lambda d: run_dialogue(d, deps, mode=mode), gold))
        else:
            sessions = [run_dialogue(d, deps, mode=mode) for d in gold]
        sessions.sort(key=lambda s: s.dialogue_id)
        write_transcript(out_path, sessions)
        header_path = Path(out_path).with_suffix(".header.json")
        header_path.write_text(
            json.dumps(_run_header(command="run", backend=backend, mode=mode,
                                   corpus=str(gold_corpus), dialogues=len(sessions)),
                       indent=2) + "\n",
            encoding="utf-8",
        )
        click.echo(f"dialogues={len(sessions)} transcript={out_path}")
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("eval")
@click.argument("transcripts", type=click.Path(exists=True, dir_okay=False))
@click.argument("gold_corpus", type=click.Path(exists=True, dir_okay=False))
@click.argument("db_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--schema", default=None, envvar="FCTOD_SCHEMA")
@click.option("--metrics", "metric_names", default="all",
              help="Comma list of metrics to print (inform,success,bleu,combined,jga,fn_se).")
@click.option("--out", "out_path", default=None, help="Write the report JSON here.")
def cmd_eval(transcripts, gold_corpus, db_dir, schema, metric_names, out_path) -> None:
    """Score transcripts against gold six-role dialogues."""
    try:
        registry = _registry(schema)
        gold = read_jsonl(gold_corpus)
        sessions = read_transcript(transcripts)
        db = load_databases(db_dir, registry)
        report = evaluate(sessions, gold, db, registry)
        if metric_names == "all":
            click.echo(report.render_table())
        else:
            wanted = [name.strip() for name in metric_names.split(",") if name.strip()]
            obj = report.to_json_obj()
            for name in wanted:
                if name not in obj:
                    raise ValueError(f"unknown metric {name!r}")
                click.echo(f"{name} {obj[name]:.2f}")
        if out_path:
            payload = report.to_json_obj()
            payload["run_header"] = _run_header(command="eval", transcripts=str(transcripts),
                                                gold=str(gold_corpus))
            Path(out_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("chat")
@click.argument("db_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--endpoint", default=None, envvar="FCTOD_ENDPOINT")
@click.option("--model", default=None, envvar="FCTOD_MODEL")
@click.option("--api-key", default=None, envvar="FCTOD_API_KEY")
@click.option("--schema", default=None, envvar="FCTOD_SCHEMA")
@click.option("--template-dir", default=None, envvar="FCTOD_TEMPLATES")
@click.option("--transcript", default="chat_transcript.jsonl")
def cmd_chat(db_dir, endpoint, model, api_key, schema, template_dir, transcript) -> None:
    """Interactive session against an HTTP backend; type 'quit' to exit."""
    try:
        registry = _registry(schema)
        db = load_databases(db_dir, registry)
        templates = _templates(template_dir)
        backend_obj = _build_backend("http", endpoint, model, api_key, [], None)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    deps = Dependencies(registry=registry, db=db, templates=templates, backend=backend_obj)
    session = DialogueSession(dialogue_id="chat")
    click.echo("chat started; type 'quit' to exit")
    while True:
        try:
            line = click.prompt("user", prompt_suffix="> ")
        except (EOFError, click.Abort):
            break
        if line.strip().casefold() in ("quit", "exit"):
            break
        outcome = run_turn(session, line, deps)
        click.echo(f"[{outcome.selected.name}] {outcome.frame.render()}")
    write_transcript(transcript, [session])
    click.echo(f"transcript saved to {transcript}")


if __name__ == "__main__":
    main()
