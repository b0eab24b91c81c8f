"""Operator entry points: serve, replay, eval-corpus, bench.

Report-producing subcommands print one JSON document to stdout or write
it to --out; with an output path, matplotlib figures are rendered next to
it unless --no-figures is given.
"""
from __future__ import annotations

import asyncio
import json
import os
from pathlib import Path

import click

from .arena import InvalidConfigError, SimConfig
from .bench import run_bench
from .evaluate import CorpusError, eval_corpus, load_bundled_corpus, load_corpus
from .gateway import Gateway, GatewayConfig
from .match import OPPONENT_POLICIES
from .replaylog import LogError, load_log, replay
from .translator import STRATEGIES, EndpointConfig


@click.group()
def main() -> None:
    """Behavior-branch arena: text commands grafted onto live agents."""


def _write_report(text: str, out: str | None) -> Path | None:
    if out is None:
        click.echo(text, nl=False)
        return None
    path = Path(out)
    path.write_text(text, "utf-8")
    click.echo(f"report written to {path}")
    return path


def _endpoint_from_options(url: str | None, model: str, api_key_env: str) -> EndpointConfig | None:
    if url is None:
        return None
    return EndpointConfig(base_url=url, model=model, api_key_env=api_key_env)


def _require_api_key(endpoint: EndpointConfig) -> str:
    key = os.environ.get(endpoint.api_key_env)
    if not key:
        raise click.ClickException(
            f"translator needs an API key: set the {endpoint.api_key_env} "
            "environment variable (changeable via --api-key-env)")
    return key


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=7777, show_default=True, help="TCP port (newline-delimited JSON).")
@click.option("--ws-port", default=None, type=int, help="WebSocket port [default: port+1].")
@click.option("--tick-rate", default=None, type=float, help="Simulation ticks per second [default: 20].")
@click.option("--translator", "strategy", default="rule", show_default=True,
              type=click.Choice(STRATEGIES))
@click.option("--endpoint-url", default=None, help="Completion endpoint base URL (llm/hybrid).")
@click.option("--model", default="code-model", show_default=True)
@click.option("--api-key-env", default="GRAFTARENA_API_KEY", show_default=True,
              help="Environment variable holding the endpoint bearer token.")
@click.option("--opponent", default="scripted", show_default=True,
              type=click.Choice(OPPONENT_POLICIES))
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSON file with simulator fields plus optional tick_rate.")
@click.option("--log", "log_path", default=None, type=click.Path(dir_okay=False),
              help="Write the session log here on shutdown/reset.")
def serve(host, port, ws_port, tick_rate, strategy, endpoint_url, model,
          api_key_env, opponent, seed, config_path, log_path) -> None:
    """Run the live gateway (TCP + WebSocket)."""
    sim = SimConfig()
    if config_path is not None:
        try:
            raw = json.loads(Path(config_path).read_text("utf-8"))
            if tick_rate is None and "tick_rate" in raw:
                tick_rate = float(raw.pop("tick_rate"))
            else:
                raw.pop("tick_rate", None)
            sim = SimConfig.from_dict({**SimConfig().to_dict(), **raw})
        except (json.JSONDecodeError, TypeError, ValueError, InvalidConfigError) as exc:
            raise click.ClickException(f"bad config file: {exc}") from None
    if tick_rate is None:
        tick_rate = 20.0
    if tick_rate <= 0:
        raise click.ClickException("tick rate must be positive")
    endpoint = _endpoint_from_options(endpoint_url, model, api_key_env)
    api_key = None
    if strategy in ("llm", "hybrid"):
        if endpoint is None:
            raise click.ClickException(f"--translator {strategy} requires --endpoint-url")
        api_key = _require_api_key(endpoint)
    config = GatewayConfig(
        host=host,
        tcp_port=port,
        ws_port=ws_port if ws_port is not None else port + 1,
        tick_rate=tick_rate,
        strategy=strategy,
        endpoint=endpoint,
        api_key=api_key,
        opponent_policy=opponent,
        seed=seed,
        sim=sim,
        log_path=log_path,
    )

    async def run() -> None:
        gateway = Gateway(config)
        click.echo(f"listening on tcp://{host}:{config.tcp_port} "
                   f"and ws://{host}:{config.ws_port} "
                   f"(translator={strategy}, opponent={opponent}, seed={seed})")
        await gateway.serve_forever()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass


@main.command("eval-corpus")
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Corpus file [default: the bundled corpus].")
@click.option("--translator", "strategy", default="rule", show_default=True,
              type=click.Choice(STRATEGIES))
@click.option("--endpoint-url", default=None)
@click.option("--model", default="code-model", show_default=True)
@click.option("--api-key-env", default="GRAFTARENA_API_KEY", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render figures next to --out.")
@click.option("--timings", is_flag=True,
              help="Include wall-clock translation latencies (breaks byte determinism).")
def eval_corpus_command(corpus_path, strategy, endpoint_url, model, api_key_env,
                        out, figures, timings) -> None:
    """Replay the command corpus and report good/bad verdicts."""
    try:
        if corpus_path is None:
            entries = load_bundled_corpus()
        else:
            entries = load_corpus(Path(corpus_path).read_text("utf-8"))
    except CorpusError as exc:
        raise click.ClickException(str(exc)) from None
    endpoint = _endpoint_from_options(endpoint_url, model, api_key_env)
    post = None
    if strategy in ("llm", "hybrid"):
        if endpoint is None:
            raise click.ClickException(f"--translator {strategy} requires --endpoint-url")
        api_key = _require_api_key(endpoint)
        from .translator import _default_post

        def post(ep, prompt, _unused, _key=api_key):
            return _default_post(ep, prompt, _key)

    report = eval_corpus(entries, strategy, endpoint, post)
    path = _write_report(report.to_json(include_timings=timings), out)
    if path is not None and figures:
        from .report import save_eval_figures
        for figure in save_eval_figures(report, path.with_suffix("")):
            click.echo(f"figure written to {figure}")
    if out is None and figures:
        click.echo("(pass --out to also render figures)", err=True)


@main.command("replay")
@click.argument("log_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Trace output path [default: stdout].")
@click.option("--figures/--no-figures", default=True, show_default=True)
def replay_command(log_file, out, figures) -> None:
    """Re-execute a session log; the trace is byte-stable across runs."""
    try:
        log = load_log(Path(log_file).read_bytes())
    except LogError as exc:
        raise click.ClickException(str(exc)) from None
    trace = replay(log)
    path = _write_report(trace, out)
    if path is not None and figures:
        from .report import save_replay_figures
        for figure in save_replay_figures(trace, path.with_suffix("")):
            click.echo(f"figure written to {figure}")


@main.command("bench")
@click.option("--ticks", default=10000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
def bench_command(ticks, seed, out, figures) -> None:
    """Measure the non-LLM pipeline against the 0.4 s Doherty budget."""
    if ticks < 0:
        raise click.ClickException("ticks must be >= 0")
    if ticks == 0:
        _write_report(json.dumps({"version": 1, "ticks": 0, "commands": 0,
                                  "budget": {"budget_line": "0.4 s Doherty threshold"}},
                                 separators=(",", ":")) + "\n", out)
        return
    result = run_bench(ticks, seed)
    text = json.dumps(result.report, separators=(",", ":")) + "\n"
    path = _write_report(text, out)
    budget = result.report["budget"]
    click.echo(f"pipeline p99 {budget['pipeline_p99_ms']:.3f} ms against the "
               f"{budget['budget_line']} ({budget['budget_ms']:.0f} ms): "
               f"{budget['llm_headroom_ms']:.1f} ms left for model inference", err=True)
    if path is not None and figures:
        from .report import save_bench_figures
        for figure in save_bench_figures(result, path.with_suffix("")):
            click.echo(f"figure written to {figure}")


if __name__ == "__main__":
    main()
