"""Session logs and byte-exact replay.

A session log is a line-delimited JSON document: a version header record
carrying config, seed, opponent policy and tick count, then one record
per applied command (tick-stamped, with the canonical script so replays
never need a translator).  Replaying produces a trace document: header,
then per tick the wire state message followed by event records.  Equal
logs replay to byte-identical traces.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .arena import SimConfig
from .match import CommandRecord, Match
from .script import parse

LOG_VERSION = 1


class LogError(Exception):
    pass


class LogVersionError(LogError):
    pass


@dataclass(frozen=True)
class SessionLog:
    config: SimConfig
    seed: int
    opponent_policy: str
    ticks: int
    commands: tuple[CommandRecord, ...]


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def dump_log(log: SessionLog) -> str:
    lines = [_dumps({
        "version": LOG_VERSION,
        "config": log.config.to_dict(),
        "seed": log.seed,
        "opponent_policy": log.opponent_policy,
        "ticks": log.ticks,
    })]
    for record in log.commands:
        lines.append(_dumps({
            "tick": record.tick,
            "agent": record.agent,
            "text": record.text,
            "script": record.script,
        }))
    return "\n".join(lines) + "\n"


def log_from_match(match: Match, ticks: int | None = None) -> SessionLog:
    return SessionLog(
        config=match.config,
        seed=match.seed,
        opponent_policy=match.opponent_policy,
        ticks=match.tick_count if ticks is None else ticks,
        commands=tuple(match.commands),
    )


def load_log(text: str | bytes) -> SessionLog:
    """Parse a session log; malformed or truncated records fail with the
    byte offset of the offending line."""
    if isinstance(text, str):
        raw = text.encode("utf-8")
    else:
        raw = text
    offset = 0
    records: list[tuple[int, dict]] = []
    for chunk in raw.split(b"\n"):
        if chunk.strip():
            try:
                records.append((offset, json.loads(chunk.decode("utf-8"))))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise LogError(f"bad log record at byte offset {offset}: {exc}") from None
        offset += len(chunk) + 1
    if not records:
        raise LogError("log is empty")
    head_offset, head = records[0]
    if not isinstance(head, dict) or "version" not in head:
        raise LogError(f"bad log record at byte offset {head_offset}: missing version header")
    if head["version"] != LOG_VERSION:
        raise LogVersionError(f"log version {head['version']!r}, expected {LOG_VERSION}")
    try:
        config = SimConfig.from_dict(head["config"])
        seed = int(head["seed"])
        policy = head["opponent_policy"]
        ticks = int(head["ticks"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LogError(f"bad log header at byte offset {head_offset}: {exc}") from None
    commands = []
    for offset, record in records[1:]:
        try:
            commands.append(CommandRecord(
                tick=int(record["tick"]),
                agent=str(record["agent"]),
                text=str(record.get("text", "")),
                script=str(record["script"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise LogError(f"bad log record at byte offset {offset}: {exc}") from None
    return SessionLog(config, seed, policy, ticks, tuple(commands))


def run_traced(match: Match, ticks: int,
               schedule: tuple[CommandRecord, ...] = ()) -> str:
    """Run a match for up to ``ticks`` ticks, applying scheduled commands at
    their tick boundaries, and return the trace document."""
    pending = sorted(schedule, key=lambda r: r.tick)
    lines = [_dumps({"version": LOG_VERSION})]
    lines.append(_dumps(match.snapshot().to_state_message()))
    idx = 0
    while match.tick_count < ticks and not match.finished:
        while idx < len(pending) and pending[idx].tick <= match.tick_count:
            record = pending[idx]
            idx += 1
            report = match.graft_script(record.agent, parse(record.script), record.text)
            lines.append(_dumps({
                "type": "graft",
                "tick": match.tick_count,
                "agent": record.agent,
                "rule": report.rule.value,
                "script": record.script,
            }))
        result = match.tick()
        lines.append(_dumps(match.snapshot().to_state_message()))
        for event in result.sim_events:
            lines.append(_dumps({
                "type": "event",
                "tick": event.tick,
                "name": event.name,
                "data": event.data,
            }))
    return "\n".join(lines) + "\n"


def replay(log: SessionLog) -> str:
    """Re-execute a session headlessly; output is byte-identical across
    replays of the same log."""
    match = Match(log.config, log.seed, log.opponent_policy)
    return run_traced(match, log.ticks, log.commands)
