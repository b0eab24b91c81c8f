"""Latency benchmark for the non-endpoint command pipeline.

Measures, per stage: text normalization + rule translation, wire-format
parse + validate + compile, graft, and the simulation tick itself.  The
pipeline total is compared against the 0.4 s interactive-response budget
(the Doherty threshold); what remains is the slack available for model
inference, which is deliberately not measured here.
"""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from .actions import catalog
from .arena import SimConfig
from .match import Match
from .script import compile_script, parse, serialize, validate
from .translator import translate_rule_based

DOHERTY_BUDGET_MS = 400.0
BUDGET_LINE = "0.4 s Doherty threshold"

BENCH_COMMANDS = (
    "tackle",
    "Keep doing thunderbolt",
    "if opponent hp below 50, retreat",
    "then use iron tail",
    "go behind the opponent",
    "tackle 3 times",
    "when the opponent comes close, iron tail",
    "face the opponent and thunderbolt",
)

PIPELINE_STAGES = ("translate", "compile", "graft")
STAGES = PIPELINE_STAGES + ("tick",)


@dataclass(frozen=True)
class BenchResult:
    report: dict
    samples: dict  # stage -> list of milliseconds


def percentile(samples: list[float], q: float) -> float:
    if not samples:
        return 0.0
    ordered = sorted(samples)
    index = min(len(ordered) - 1, round(q * (len(ordered) - 1)))
    return ordered[index]


def _stage_summary(samples: list[float]) -> dict:
    return {
        "samples": len(samples),
        "p50_ms": round(percentile(samples, 0.50), 6),
        "p99_ms": round(percentile(samples, 0.99), 6),
        "max_ms": round(max(samples), 6) if samples else 0.0,
    }


def run_bench(ticks: int, seed: int = 0, command_every: int = 50) -> BenchResult:
    """Drive a live match for ``ticks`` ticks, pushing a rotating command
    through the full non-endpoint pipeline every ``command_every`` ticks."""
    samples: dict[str, list[float]] = {name: [] for name in STAGES}
    pipeline: list[float] = []
    cat = catalog()

    match = Match(SimConfig(), seed, opponent_policy="scripted")
    command_index = 0
    for i in range(ticks):
        if match.finished:
            seed += 1
            match = Match(SimConfig(), seed, opponent_policy="scripted")
        if command_every and i % command_every == 0:
            text = BENCH_COMMANDS[command_index % len(BENCH_COMMANDS)]
            command_index += 1

            t0 = time.perf_counter_ns()
            script = translate_rule_based(text)
            t1 = time.perf_counter_ns()
            wire = serialize(script)
            reparsed = parse(wire)
            validate(reparsed, cat)
            fragment = compile_script(reparsed, cat)
            t2 = time.perf_counter_ns()
            match.graft_fragment("player", fragment)
            t3 = time.perf_counter_ns()

            samples["translate"].append((t1 - t0) / 1e6)
            samples["compile"].append((t2 - t1) / 1e6)
            samples["graft"].append((t3 - t2) / 1e6)
            pipeline.append((t3 - t0) / 1e6)

        t0 = time.perf_counter_ns()
        match.tick()
        samples["tick"].append((time.perf_counter_ns() - t0) / 1e6)

    tick_ms = samples["tick"]
    pipeline_p99 = percentile(pipeline, 0.99)
    report = {
        "version": 1,
        "ticks": ticks,
        "commands": len(pipeline),
        "stages": {name: _stage_summary(samples[name]) for name in STAGES},
        "pipeline": {
            "stages": list(PIPELINE_STAGES),
            "p50_ms": round(percentile(pipeline, 0.50), 6),
            "p99_ms": round(pipeline_p99, 6),
        },
        "tick_jitter_ms": round(statistics.pstdev(tick_ms), 6) if len(tick_ms) > 1 else 0.0,
        "budget": {
            "budget_line": BUDGET_LINE,
            "budget_ms": DOHERTY_BUDGET_MS,
            "pipeline_p99_ms": round(pipeline_p99, 6),
            "llm_headroom_ms": round(DOHERTY_BUDGET_MS - pipeline_p99, 6),
        },
    }
    samples["pipeline"] = pipeline
    return BenchResult(report, samples)
