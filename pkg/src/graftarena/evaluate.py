"""Corpus evaluation: mechanized good/bad verdicts over scripted scenarios.

Each corpus entry names a command, a world setup, and checks over the
state trace.  A check passes when its metric satisfies its comparison at
some tick inside the window after the graft; delta comparisons are taken
against the metric's value at graft time.  An entry's verdict is good iff
the command translated and every check passed.  Under the rule-based
translator the whole run is deterministic, so two runs of the same corpus
produce byte-identical reports.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources

from .arena import OPPONENT, PLAYER, SimConfig
from .match import Match
from .translator import EndpointConfig, TranslationError, translate

CORPUS_VERSION = 1

METRICS = ("opponent_hp", "self_hp", "distance", "relative_bearing",
           "facing_error", "attack_count")
OPS = ("<", ">", "==", "delta<0", "delta>0")


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class Check:
    metric: str
    op: str
    value: float
    within_ticks: int
    kind: str | None = None  # attack_count only

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise CorpusError(f"unknown metric {self.metric!r}")
        if self.op not in OPS:
            raise CorpusError(f"unknown op {self.op!r}")
        if self.within_ticks <= 0:
            raise CorpusError("within_ticks must be positive")
        if self.metric == "attack_count" and not self.kind:
            raise CorpusError("attack_count checks need a kind")


@dataclass(frozen=True)
class Scenario:
    spawn_distance: float = 6.0
    player_hp: int = 100
    opponent_hp: int = 100
    player_facing: str | float = "toward"
    opponent_policy: str = "idle"
    seed: int = 7
    command_at: int = 0
    pre_commands: tuple = ()  # ((tick, text), ...)


@dataclass(frozen=True)
class CorpusEntry:
    command: str
    expected: str  # good | bad
    checks: tuple = ()
    scenario: Scenario = field(default_factory=Scenario)


def _entry_from_dict(raw: dict, where: str) -> CorpusEntry:
    try:
        scenario_raw = dict(raw.get("scenario", {}))
        pre = tuple((int(c["at"]), str(c["text"]))
                    for c in scenario_raw.pop("pre_commands", []))
        scenario = Scenario(pre_commands=pre, **scenario_raw)
        checks = tuple(
            Check(
                metric=c["metric"],
                op=c["op"],
                value=float(c.get("value", 0)),
                within_ticks=int(c["within_ticks"]),
                kind=c.get("kind"),
            )
            for c in raw.get("checks", [])
        )
        return CorpusEntry(
            command=str(raw["command"]),
            expected=str(raw["expected"]),
            checks=checks,
            scenario=scenario,
        )
    except (KeyError, TypeError, ValueError, CorpusError) as exc:
        raise CorpusError(f"bad corpus entry at {where}: {exc}") from None


def load_corpus(text: str) -> list[CorpusEntry]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise CorpusError("corpus is empty")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorpusError(f"bad corpus header: {exc}") from None
    if head.get("version") != CORPUS_VERSION:
        raise CorpusError(f"corpus version {head.get('version')!r}, expected {CORPUS_VERSION}")
    entries = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"bad corpus entry at line {i}: {exc}") from None
        entries.append(_entry_from_dict(raw, f"line {i}"))
    return entries


def bundled_corpus_text() -> str:
    return resources.files("graftarena.data").joinpath("corpus.jsonl").read_text("utf-8")


def load_bundled_corpus() -> list[CorpusEntry]:
    return load_corpus(bundled_corpus_text())


# --------------------------------------------------------------------------
# Metrics.

def _wrap_abs(angle: float) -> float:
    return abs((angle + math.pi) % (2 * math.pi) - math.pi)


def _metrics(match: Match, attack_counts: dict) -> dict:
    snap = match.snapshot()
    player = snap.agent(PLAYER)
    opponent = snap.agent(OPPONENT)
    to_player = math.atan2(player.y - opponent.y, player.x - opponent.x)
    to_opponent = math.atan2(opponent.y - player.y, opponent.x - player.x)
    out = {
        "opponent_hp": float(opponent.hp),
        "self_hp": float(player.hp),
        "distance": math.dist((player.x, player.y), (opponent.x, opponent.y)),
        "relative_bearing": _wrap_abs(to_player - opponent.facing),
        "facing_error": _wrap_abs(to_opponent - player.facing),
    }
    for kind, count in attack_counts.items():
        out[f"attack_count:{kind}"] = float(count)
    return out


def _check_key(check: Check) -> str:
    return f"attack_count:{check.kind}" if check.metric == "attack_count" else check.metric


def _check_holds(check: Check, value: float, baseline: float) -> bool:
    if check.op == "<":
        return value < check.value
    if check.op == ">":
        return value > check.value
    if check.op == "==":
        return value == check.value
    if check.op == "delta>0":
        return value - baseline > check.value
    return value - baseline < -check.value  # delta<0


@dataclass
class CheckResult:
    check: Check
    passed: bool
    at_tick: int | None  # tick (relative to graft) where it first held
    observed: float  # metric value at window end (or when passed)

    def to_dict(self) -> dict:
        out = {
            "metric": self.check.metric,
            "op": self.check.op,
            "value": self.check.value,
            "within_ticks": self.check.within_ticks,
            "passed": self.passed,
            "at_tick": self.at_tick,
            "observed": round(self.observed, 6),
        }
        if self.check.kind:
            out["kind"] = self.check.kind
        return out


@dataclass
class EntryResult:
    command: str
    expected: str
    verdict: str
    checks: list
    translation_error: str | None = None
    translation_ms: float = 0.0
    excerpt: list = field(default_factory=list)

    @property
    def matched(self) -> bool:
        return self.verdict == self.expected

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "command": self.command,
            "expected": self.expected,
            "verdict": self.verdict,
            "matched": self.matched,
            "checks": [c.to_dict() for c in self.checks],
        }
        if self.translation_error is not None:
            out["translation_error"] = self.translation_error
        if self.excerpt:
            out["excerpt"] = self.excerpt
        if include_timings:
            out["translation_ms"] = round(self.translation_ms, 3)
        return out


@dataclass
class EvalReport:
    strategy: str
    results: list

    @property
    def total(self) -> int:
        return len(self.results)

    @property
    def good(self) -> int:
        return sum(1 for r in self.results if r.verdict == "good")

    @property
    def good_ratio(self) -> float:
        return 0.0 if not self.results else 100.0 * self.good / self.total

    def to_dict(self, include_timings: bool = False) -> dict:
        return {
            "version": CORPUS_VERSION,
            "strategy": self.strategy,
            "total": self.total,
            "good": self.good,
            "good_ratio": round(self.good_ratio, 2),
            "mismatches": [r.command for r in self.results if not r.matched],
            "entries": [r.to_dict(include_timings) for r in self.results],
        }

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), separators=(",", ":")) + "\n"


def _facing_value(spec: str | float, toward: float) -> float:
    if spec == "toward":
        return toward
    if spec == "away":
        return (toward + math.pi) % (2 * math.pi)
    return float(spec) % (2 * math.pi)


def _setup_match(scenario: Scenario) -> Match:
    config = dataclasses.replace(SimConfig(), spawn_distance=scenario.spawn_distance)
    match = Match(config, scenario.seed, scenario.opponent_policy)
    match.world.agents[PLAYER].hp = scenario.player_hp
    match.world.agents[OPPONENT].hp = scenario.opponent_hp
    match.world.agents[PLAYER].facing = _facing_value(scenario.player_facing, 0.0)
    return match


def evaluate_entry(entry: CorpusEntry, strategy: str = "rule",
                   endpoint: EndpointConfig | None = None, post=None) -> EntryResult:
    match = _setup_match(entry.scenario)
    attack_counts: dict[str, int] = {}

    def consume(events) -> None:
        for event in events:
            if event.name == "attack" and event.data["agent"] == PLAYER:
                attack_counts[event.data["kind"]] = attack_counts.get(event.data["kind"], 0) + 1

    def run_to(tick: int) -> None:
        while match.tick_count < tick and not match.finished:
            consume(match.tick().sim_events)

    pending = sorted(entry.scenario.pre_commands)
    translation_ms = 0.0
    try:
        for at, text in pending:
            run_to(at)
            result = translate(text, strategy, endpoint, post=post)
            translation_ms += result.latency_ms
            match.graft_script(PLAYER, result.script, text)
        run_to(entry.scenario.command_at)
        result = translate(entry.command, strategy, endpoint, post=post)
        translation_ms += result.latency_ms
        match.graft_script(PLAYER, result.script, entry.command)
    except TranslationError as exc:
        return EntryResult(entry.command, entry.expected, "bad", [],
                           translation_error=str(exc), translation_ms=translation_ms)

    baselines = _metrics(match, attack_counts)
    horizon = max((c.within_ticks for c in entry.checks), default=0)
    states: list[dict] = []
    results = {
        check: CheckResult(check, False, None, baselines.get(_check_key(check), 0.0))
        for check in entry.checks
    }
    for rel in range(1, horizon + 1):
        if match.finished:
            break
        consume(match.tick().sim_events)
        metrics = _metrics(match, attack_counts)
        states.append(match.snapshot().to_state_message())
        for check, state in results.items():
            if state.passed or rel > check.within_ticks:
                continue
            value = metrics.get(_check_key(check), 0.0)
            state.observed = value
            if _check_holds(check, value, baselines.get(_check_key(check), 0.0)):
                state.passed = True
                state.at_tick = rel
        if all(s.passed for s in results.values()):
            break

    ordered = [results[c] for c in entry.checks]
    verdict = "good" if all(s.passed for s in ordered) else "bad"
    excerpt = [] if verdict == "good" else states[-3:]
    return EntryResult(entry.command, entry.expected, verdict, ordered,
                       translation_ms=translation_ms, excerpt=excerpt)


def eval_corpus(entries, strategy: str = "rule",
                endpoint: EndpointConfig | None = None, post=None) -> EvalReport:
    results = [evaluate_entry(entry, strategy, endpoint, post) for entry in entries]
    return EvalReport(strategy, results)
