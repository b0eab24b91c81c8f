"""Network front door: newline-delimited JSON over TCP and the same
payloads over WebSocket.

A single asyncio task owns the match and ticks it at a fixed rate.
Commands are translated off the tick path, queued, and grafted only at
tick boundaries, so no tick ever observes a half-applied graft and the
loop never waits on translation.  Each subscriber gets a bounded queue;
when a slow client falls behind, its oldest updates are dropped in favor
of fresh state.
"""
from __future__ import annotations

import asyncio
import contextlib
import json
import signal
from dataclasses import dataclass, field
from pathlib import Path

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from .arena import OPPONENT, PLAYER, SimConfig
from .branch import (
    ActionNode,
    BehaviorBranch,
    ConditionNode,
    RepeatNode,
    StructureError,
    UNBOUNDED,
    validate_arborescence,
)
from .match import CommandRecord, Match, MatchError
from .replaylog import dump_log, log_from_match
from .script import ScriptError, parse, serialize
from .translator import EndpointConfig, TranslationError, translate

CHANNELS = ("state", "branch", "events")


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    tcp_port: int = 7777
    ws_port: int = 7778
    tick_rate: float = 20.0
    strategy: str = "rule"
    endpoint: EndpointConfig | None = None
    api_key: str | None = None
    opponent_policy: str = "scripted"
    seed: int = 0
    sim: SimConfig = field(default_factory=SimConfig)
    queue_size: int = 64
    log_path: str | None = None
    schedule: tuple[CommandRecord, ...] = ()  # for scripted, reproducible drives


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


class Session:
    _counter = 0

    def __init__(self, transport: str, queue_size: int):
        Session._counter += 1
        self.id = f"{transport}-{Session._counter}"
        self.transport = transport
        self.queue: asyncio.Queue[str] = asyncio.Queue(maxsize=queue_size)
        self.subscriptions: set[str] = set(CHANNELS)
        self.closed = False

    def push(self, line: str) -> None:
        """Enqueue, dropping the oldest update when the client lags."""
        if self.closed:
            return
        while True:
            try:
                self.queue.put_nowait(line)
                return
            except asyncio.QueueFull:
                with contextlib.suppress(asyncio.QueueEmpty):
                    self.queue.get_nowait()


def branch_message(agent: str, tick: int, branch: BehaviorBranch) -> dict:
    """Structural snapshot for diagram rendering (branch channel)."""
    nodes = []
    for nid, node in sorted(branch.nodes.items()):
        if isinstance(node, ActionNode):
            entry = {"id": nid, "kind": "action", "label": node.kind,
                     "next": node.next, "satisfied": node.satisfied}
        elif isinstance(node, ConditionNode):
            entry = {"id": nid, "kind": "condition", "label": node.kind,
                     "next": node.next, "true": node.true_node, "fired": node.fired}
        elif isinstance(node, RepeatNode):
            count = "forever" if node.count == UNBOUNDED else int(node.count)
            remaining = node.remaining
            if remaining == UNBOUNDED:
                remaining = "forever"
            elif remaining is not None:
                remaining = int(remaining)
            entry = {"id": nid, "kind": "repeat", "label": f"repeat {count}",
                     "next": node.next, "count": count, "remaining": remaining}
        else:
            entry = {"id": nid, "kind": "then", "label": "then", "next": node.next}
        nodes.append(entry)
    return {
        "type": "branch",
        "agent": agent,
        "tick": tick,
        "root": branch.root,
        "current": branch.current,
        "active_action": branch.active_action(),
        "nodes": nodes,
    }


class Gateway:
    def __init__(self, config: GatewayConfig):
        self.config = config
        self.match = Match(config.sim, config.seed, config.opponent_policy)
        self.sessions: dict[str, Session] = {}
        self.pending_grafts: asyncio.Queue = asyncio.Queue()
        self.schedule = sorted(config.schedule, key=lambda r: r.tick)
        self._schedule_index = 0
        self._tcp_server: asyncio.Server | None = None
        self._ws_server = None
        self._tick_task: asyncio.Task | None = None
        self._writer_tasks: set[asyncio.Task] = set()
        self._last_branch_lines: dict[str, str] = {}
        self.tcp_port = config.tcp_port
        self.ws_port = config.ws_port

    # -- lifecycle ---------------------------------------------------------

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._serve_tcp, self.config.host, self.config.tcp_port)
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self._ws_server = await ws_serve(
            self._serve_ws, self.config.host, self.config.ws_port)
        for sock in self._ws_server.sockets:
            self.ws_port = sock.getsockname()[1]
        self._tick_task = asyncio.create_task(self._tick_loop())

    async def stop(self) -> None:
        if self._tick_task:
            self._tick_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._tick_task
        for task in list(self._writer_tasks):
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task
        if self._tcp_server:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        self._write_session_log()

    async def serve_forever(self) -> None:
        await self.start()
        loop = asyncio.get_running_loop()
        done = asyncio.Event()
        for sig in (signal.SIGINT, signal.SIGTERM):
            with contextlib.suppress(NotImplementedError):
                loop.add_signal_handler(sig, done.set)
        await done.wait()
        await self.stop()

    def _write_session_log(self) -> None:
        if self.config.log_path:
            log = log_from_match(self.match)
            Path(self.config.log_path).write_text(dump_log(log), "utf-8")

    # -- broadcasting --------------------------------------------------------

    def _broadcast(self, channel: str, line: str) -> None:
        for session in list(self.sessions.values()):
            if channel in session.subscriptions:
                session.push(line)

    def _broadcast_state(self) -> None:
        line = _dumps(self.match.snapshot().to_state_message())
        self._broadcast("state", line)

    def _broadcast_branches(self) -> None:
        tick = self.match.tick_count
        for agent, branch in self.match.branches.items():
            message = branch_message(agent, tick, branch)
            key = _dumps({k: v for k, v in message.items() if k != "tick"})
            if self._last_branch_lines.get(agent) != key:
                self._last_branch_lines[agent] = key
                self._broadcast("branch", _dumps(message))

    def _broadcast_events(self, result) -> None:
        for event in result.sim_events:
            self._broadcast("events", _dumps({
                "type": "event", "tick": event.tick,
                "name": event.name, "data": event.data,
            }))
        for agent, outcome in result.branch_outcomes.items():
            for event in outcome.events:
                self._broadcast("events", _dumps({
                    "type": "event", "tick": result.tick, "agent": agent,
                    "name": event.name, "data": {"node": event.node},
                }))

    # -- the tick loop -------------------------------------------------------

    async def _tick_loop(self) -> None:
        interval = 1.0 / self.config.tick_rate
        loop = asyncio.get_running_loop()
        next_deadline = loop.time()
        while True:
            self._apply_boundary_grafts()
            if not self.match.finished:
                result = self.match.tick()
                self._broadcast_state()
                self._broadcast_branches()
                self._broadcast_events(result)
            next_deadline += interval
            delay = next_deadline - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_deadline = loop.time()  # fell behind; don't burst

    def _apply_boundary_grafts(self) -> None:
        while self._schedule_index < len(self.schedule) and \
                self.schedule[self._schedule_index].tick <= self.match.tick_count:
            record = self.schedule[self._schedule_index]
            self._schedule_index += 1
            if self.match.finished:
                continue
            report = self.match.graft_script(record.agent, parse(record.script), record.text)
            self._broadcast("branch", _dumps({
                "type": "graft", "agent": record.agent, "rule": report.rule.value,
                "script": record.script, "latency_ms": 0.0,
            }))
        while True:
            try:
                agent, script, text, latency_ms, session = self.pending_grafts.get_nowait()
            except asyncio.QueueEmpty:
                break
            if self.match.finished:
                session.push(_dumps({"type": "error", "message": "match already finished"}))
                continue
            try:
                report = self.match.graft_script(agent, script, text)
            except (MatchError, ScriptError) as exc:
                session.push(_dumps({"type": "error", "message": str(exc)}))
                continue
            self._broadcast("branch", _dumps({
                "type": "graft", "agent": agent, "rule": report.rule.value,
                "script": serialize(script), "latency_ms": round(latency_ms, 3),
            }))
        # no tick may observe a half-applied graft
        for agent, branch in self.match.branches.items():
            problems = validate_arborescence(branch)
            if problems:
                raise StructureError(f"{agent} branch corrupt after graft: {problems}")

    # -- message handling ------------------------------------------------------

    async def _handle_message(self, session: Session, raw: str) -> None:
        try:
            message = json.loads(raw)
            if not isinstance(message, dict):
                raise ValueError("message must be an object")
        except (json.JSONDecodeError, ValueError) as exc:
            session.push(_dumps({"type": "error", "message": f"malformed message: {exc}"}))
            return
        kind = message.get("type")
        if kind == "command":
            await self._handle_command(session, message)
        elif kind == "reset":
            self._write_session_log()
            self.match = Match(self.config.sim, self.config.seed,
                               self.config.opponent_policy)
            self._last_branch_lines.clear()
            self._ack(session, message)
            self._broadcast_state()
        elif kind == "subscribe":
            channels = message.get("channels", [])
            if not isinstance(channels, list) or \
                    any(c not in CHANNELS for c in channels):
                session.push(_dumps({"type": "error",
                                     "message": f"channels must be a subset of {list(CHANNELS)}"}))
                return
            session.subscriptions = set(channels)
            self._ack(session, message)
        else:
            session.push(_dumps({"type": "error", "message": f"unknown message type {kind!r}"}))

    def _ack(self, session: Session, message: dict) -> None:
        ack: dict = {"type": "ack"}
        if "id" in message:
            ack["id"] = message["id"]
        session.push(_dumps(ack))

    async def _handle_command(self, session: Session, message: dict) -> None:
        text = message.get("text", "")
        if not isinstance(text, str) or not text.strip():
            session.push(_dumps({"type": "error", "message": "empty command"}))
            return
        agent = message.get("agent", PLAYER)
        if agent not in (PLAYER, OPPONENT):
            session.push(_dumps({"type": "error", "message": f"unknown agent {agent!r}"}))
            return
        if agent not in self.match.branches:
            session.push(_dumps({"type": "error",
                                 "message": f"agent {agent!r} is not branch-driven "
                                            "(start with --opponent branch)"}))
            return
        if self.match.finished:
            session.push(_dumps({"type": "error", "message": "match already finished"}))
            return
        self._ack(session, message)
        try:
            if self.config.strategy == "rule":
                result = translate(text, "rule")
            else:
                result = await asyncio.to_thread(
                    translate, text, self.config.strategy,
                    self.config.endpoint, None, None, self.config.api_key)
        except TranslationError as exc:
            session.push(_dumps({"type": "error", "message": str(exc)}))
            return
        await self.pending_grafts.put((agent, result.script, text,
                                       result.latency_ms, session))

    # -- transports -------------------------------------------------------------

    def _register(self, transport: str) -> Session:
        session = Session(transport, self.config.queue_size)
        self.sessions[session.id] = session
        return session

    def _unregister(self, session: Session) -> None:
        session.closed = True
        self.sessions.pop(session.id, None)

    async def _serve_tcp(self, reader: asyncio.StreamReader,
                         writer: asyncio.StreamWriter) -> None:
        session = self._register("tcp")

        async def pump() -> None:
            while True:
                line = await session.queue.get()
                writer.write(line.encode("utf-8") + b"\n")
                await writer.drain()

        pump_task = asyncio.create_task(pump())
        self._writer_tasks.add(pump_task)
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                if raw.strip():
                    await self._handle_message(session, raw.decode("utf-8", "replace"))
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            self._unregister(session)
            pump_task.cancel()
            self._writer_tasks.discard(pump_task)
            with contextlib.suppress(asyncio.CancelledError):
                await pump_task
            writer.close()
            with contextlib.suppress(ConnectionResetError, BrokenPipeError):
                await writer.wait_closed()

    async def _serve_ws(self, connection) -> None:
        session = self._register("ws")

        async def pump() -> None:
            while True:
                line = await session.queue.get()
                await connection.send(line)

        pump_task = asyncio.create_task(pump())
        self._writer_tasks.add(pump_task)
        try:
            async for raw in connection:
                if isinstance(raw, bytes):
                    raw = raw.decode("utf-8", "replace")
                await self._handle_message(session, raw)
        except ConnectionClosed:
            pass
        finally:
            self._unregister(session)
            pump_task.cancel()
            self._writer_tasks.discard(pump_task)
            with contextlib.suppress(asyncio.CancelledError):
                await pump_task


async def serve(config: GatewayConfig) -> Gateway:
    """Start a gateway; the caller owns stop()."""
    gateway = Gateway(config)
    await gateway.start()
    return gateway
