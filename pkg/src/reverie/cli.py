"""Operator command line: chat REPL, evaluation runs, latency simulation, serve.

Every command works fully offline against a scripted or synthetic backend so
the whole pipeline is demonstrable without network access; live runs need the
REVERIE_API_URL and REVERIE_API_KEY environment variables.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .evaluation import (
    records_to_csv,
    render_markdown,
    result_to_dict,
    run_scenario,
    summarize,
)
from .gateway import Backend, LiveBackend, ScriptedBackend, SyntheticBackend
from .latency import HumanTimingModel, aggregate_reports, render_tables, simulate_conversation
from .scenarios import load_scenario_dir, synthetic_scenario
from .session import VARIANTS, AgentConfig, AgentSession


def resolve_backend(scripted_path: str | None, synthetic: bool, model_id: str) -> Backend:
    if scripted_path:
        try:
            return ScriptedBackend.from_file(scripted_path)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot load scripted plan {scripted_path}: {exc}")
    if synthetic:
        return SyntheticBackend()
    if not os.getenv("REVERIE_API_URL") or not os.getenv("REVERIE_API_KEY"):
        raise click.UsageError(
            "live backend not configured: set REVERIE_API_URL and REVERIE_API_KEY, "
            "or pass --scripted PLAN.json / --synthetic for an offline run"
        )
    return LiveBackend()


@click.group()
def main():
    """Conversational agent with asynchronous background reflection."""


@main.command()
@click.option("--variant", type=click.Choice(VARIANTS), default="full", show_default=True)
@click.option("--scripted", "scripted_path", type=click.Path(exists=True), default=None,
              help="Scripted backend plan (JSON) for deterministic offline runs.")
@click.option("--synthetic", is_flag=True, help="Use the deterministic synthetic backend.")
@click.option("--model", "model_id", default="openai/gpt-4o", show_default=True)
@click.option("--show-internal", is_flag=True,
              help="Print narrative and thread updates after each turn.")
def chat(variant, scripted_path, synthetic, model_id, show_internal):
    """Interactive chat REPL; EOF or /quit exits."""
    backend = resolve_backend(scripted_path, synthetic, model_id)
    offline = scripted_path is not None or synthetic
    config = AgentConfig(variant=variant, model_id=model_id, retries=0 if offline else 2)
    session = AgentSession(backend, config)
    click.echo(f"session {session.session_id} (variant={variant}); /quit to exit")
    try:
        while True:
            try:
                line = click.prompt("you", prompt_suffix="> ", default="", show_default=False)
            except (EOFError, click.Abort):
                break
            if not line.strip():
                continue
            if line.strip() == "/quit":
                break
            try:
                trace = session.post_message(line)
            except Exception as exc:
                click.echo(f"error: {exc}", err=True)
                return sys.exit(1)
            click.echo(f"agent> {trace['reply']}")
            if show_internal:
                session.drain(timeout=60)
                for event in session.events.all():
                    if event.kind == "narrative_updated" and \
                            event.payload.get("turn_index") == trace["turn_index"]:
                        stale = " (stale)" if event.payload["stale"] else ""
                        click.echo(f"[narrative{stale}] {event.payload['text']}")
                    if event.kind == "threads_produced" and \
                            event.payload.get("turn_index") == trace["turn_index"]:
                        for key in ("goal", "reasoning", "memory"):
                            click.echo(f"[{key}] {event.payload[key]}")
    finally:
        session.drain(timeout=10)
        session.scheduler.shutdown()


@main.command("eval")
@click.option("--scenarios", "scenario_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--variants", default="full", show_default=True,
              help="Comma-separated ablation variants to run.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="eval-out",
              show_default=True)
@click.option("--live", is_flag=True,
              help="Use the live backend for agent and judge instead of the "
                   "deterministic synthetic backend.")
@click.option("--resamples", default=10_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--strict", is_flag=True,
              help="Exit nonzero if any scenario is malformed or errors.")
def eval_command(scenario_dir, variants, out_dir, live, resamples, seed, strict):
    """Run the variants x scenarios matrix and write JSON/CSV/markdown reports."""
    variant_list = [v.strip() for v in variants.split(",") if v.strip()]
    for v in variant_list:
        if v not in VARIANTS:
            raise click.UsageError(f"unknown variant: {v!r}")
    scripts, errors = load_scenario_dir(scenario_dir)
    for line in errors:
        click.echo(f"skipping malformed scenario: {line}", err=True)
    if errors and strict:
        sys.exit(1)
    if not scripts:
        raise click.UsageError(f"no scenarios found in {scenario_dir}")

    records = []
    for script in scripts:
        for variant in variant_list:
            if live:
                agent = resolve_backend(None, False, "")
                judge_backend = resolve_backend(None, False, "")
            else:
                agent = SyntheticBackend()
                judge_backend = SyntheticBackend()
            records.append(run_scenario(script, variant, agent, judge_backend))
    errored = [r for r in records if r.errored]
    for r in errored:
        click.echo(f"errored: {r.scenario_id} [{r.variant}]: {r.error}", err=True)

    compare = (variant_list[0], variant_list[-1]) if len(variant_list) >= 2 else None
    result = summarize(records, resamples=resamples, seed=seed, compare=compare)

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.json"), "w", encoding="utf-8") as fh:
        json.dump(result_to_dict(result), fh, indent=2)
    with open(os.path.join(out_dir, "records.csv"), "w", encoding="utf-8") as fh:
        fh.write(records_to_csv(records))
    markdown = render_markdown(result)
    with open(os.path.join(out_dir, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(markdown + "\n")
    click.echo(markdown)
    click.echo(f"\nwrote results to {out_dir} ({len(records)} records)")
    if errored and strict:
        sys.exit(1)


@main.command()
@click.option("--n", "n_conversations", default=80, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--typing-wpm", default=40.0, show_default=True)
@click.option("--reading-wpm", default=250.0, show_default=True)
@click.option("--delays", "delays_path", type=click.Path(exists=True), default=None,
              help="JSON file of scripted agent response delays keyed by turn type.")
@click.option("--reply-words", default=100, show_default=True,
              help="Synthetic agent reply length in words.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write the full report JSON here as well.")
def simulate(n_conversations, seed, typing_wpm, reading_wpm, delays_path, reply_words, out_path):
    """Simulate N conversations on a virtual clock and print timing tables."""
    if typing_wpm <= 0 or reading_wpm <= 0:
        raise click.UsageError("typing/reading WPM must be positive")
    if n_conversations <= 0:
        raise click.UsageError("--n must be positive")
    agent_delays = None
    if delays_path:
        with open(delays_path, encoding="utf-8") as fh:
            agent_delays = json.load(fh)
    reports = []
    for i in range(n_conversations):
        model = HumanTimingModel(
            typing_wpm=typing_wpm, reading_wpm=reading_wpm, rng_seed=seed + i
        )
        session = AgentSession(
            SyntheticBackend(talker_words=reply_words), AgentConfig(retries=0)
        )
        reports.append(
            simulate_conversation(
                synthetic_scenario(i), model, session, agent_delays=agent_delays
            )
        )
        session.scheduler.shutdown()
    pooled = aggregate_reports(reports)
    click.echo(f"Simulated {n_conversations} conversations, {len(pooled.turns)} turns\n")
    click.echo(render_tables(pooled))
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(pooled.to_json())
        click.echo(f"\nwrote report to {out_path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--persist-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for append-only JSONL session transcripts.")
@click.option("--static-dir", type=click.Path(file_okay=False), default=None,
              help="Directory with the inspector UI build to serve at /.")
def serve(host, port, persist_dir, static_dir):
    """Run the HTTP/WebSocket service until interrupted."""
    import uvicorn

    from .service import create_app

    app = create_app(persist_dir=persist_dir, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except SystemExit:
        raise
    except OSError as exc:
        click.echo(f"cannot bind {host}:{port}: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
