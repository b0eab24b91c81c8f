"""Figure rendering for CLI reports.

Every report path that writes a JSON document can also render matplotlib
figures next to it; figures are plain PNG files named after the output
stem.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import BUDGET_LINE, DOHERTY_BUDGET_MS  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def save_bench_figures(result, out_stem: Path) -> list[Path]:
    """Stage latency distributions and the pipeline-vs-budget picture."""
    out_stem = Path(out_stem)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    stages = [name for name in ("translate", "compile", "graft", "pipeline", "tick")
              if result.samples.get(name)]
    data = [result.samples[name] for name in stages]
    ax.boxplot(data, tick_labels=stages, showfliers=False)
    ax.set_yscale("log")
    ax.set_ylabel("milliseconds (log)")
    ax.set_title("Command pipeline and tick latency")
    paths.append(_save(fig, out_stem.with_name(out_stem.name + "_latency.png")))

    fig, ax = plt.subplots(figsize=(7, 3))
    p99 = result.report["pipeline"]["p99_ms"]
    ax.barh(["pipeline p99"], [p99], color="tab:blue")
    ax.axvline(DOHERTY_BUDGET_MS, color="tab:red", linestyle="--",
               label=BUDGET_LINE)
    ax.set_xscale("log")
    ax.set_xlabel("milliseconds (log)")
    ax.set_title(f"Headroom for model inference: {result.report['budget']['llm_headroom_ms']:.1f} ms")
    ax.legend()
    paths.append(_save(fig, out_stem.with_name(out_stem.name + "_budget.png")))
    return paths


def save_eval_figures(report, out_stem: Path) -> list[Path]:
    """Verdict counts and the per-entry outcome strip."""
    out_stem = Path(out_stem)
    paths = []

    fig, ax = plt.subplots(figsize=(5, 4))
    good = report.good
    bad = report.total - good
    ax.bar(["good", "bad"], [good, bad], color=["tab:green", "tab:red"])
    ax.set_ylabel("entries")
    ax.set_title(f"Corpus verdicts: {report.good_ratio:.2f}% good")
    paths.append(_save(fig, out_stem.with_name(out_stem.name + "_verdicts.png")))

    fig, ax = plt.subplots(figsize=(8, max(3, 0.22 * report.total)))
    labels = [r.command[:40] for r in report.results]
    colors = ["tab:green" if r.verdict == "good" else "tab:red" for r in report.results]
    ax.barh(range(report.total), [1] * report.total, color=colors)
    ax.set_yticks(range(report.total), labels, fontsize=6)
    ax.set_xticks([])
    ax.invert_yaxis()
    ax.set_title("Per-entry verdicts")
    paths.append(_save(fig, out_stem.with_name(out_stem.name + "_entries.png")))
    return paths


def save_replay_figures(trace_text: str, out_stem: Path) -> list[Path]:
    """Agent trajectories and HP timelines from a trace document."""
    out_stem = Path(out_stem)
    states = [json.loads(line) for line in trace_text.splitlines()
              if line.startswith('{"type":"state"')]
    if not states:
        return []
    agents: dict[str, dict[str, list[float]]] = {}
    for state in states:
        for agent in state["agents"]:
            track = agents.setdefault(agent["id"], {"x": [], "y": [], "hp": [], "tick": []})
            track["x"].append(agent["x"])
            track["y"].append(agent["y"])
            track["hp"].append(agent["hp"])
            track["tick"].append(state["tick"])
    paths = []

    fig, ax = plt.subplots(figsize=(6, 6))
    for aid, track in agents.items():
        ax.plot(track["x"], track["y"], label=aid)
        ax.plot(track["x"][-1:], track["y"][-1:], "o")
    ax.set_aspect("equal")
    ax.set_title("Trajectories")
    ax.legend()
    paths.append(_save(fig, out_stem.with_name(out_stem.name + "_trajectories.png")))

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for aid, track in agents.items():
        ax.plot(track["tick"], track["hp"], label=aid)
    ax.set_xlabel("tick")
    ax.set_ylabel("hp")
    ax.set_title("HP over time")
    ax.legend()
    paths.append(_save(fig, out_stem.with_name(out_stem.name + "_hp.png")))
    return paths
