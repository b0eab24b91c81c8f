"""Live gateway: wire protocol over TCP and WebSocket."""
from __future__ import annotations

import asyncio
import json

from websockets.asyncio.client import connect as ws_connect

from graftarena.gateway import Gateway, GatewayConfig
from graftarena.match import CommandRecord


def fast_config(**overrides) -> GatewayConfig:
    base = dict(tcp_port=0, ws_port=0, tick_rate=200.0, seed=3,
                opponent_policy="idle")
    base.update(overrides)
    return GatewayConfig(**base)


class TcpClient:
    def __init__(self):
        self.reader = None
        self.writer = None

    async def connect(self, host: str, port: int) -> "TcpClient":
        self.reader, self.writer = await asyncio.open_connection(host, port)
        return self

    async def send(self, obj) -> None:
        line = obj if isinstance(obj, str) else json.dumps(obj)
        self.writer.write(line.encode() + b"\n")
        await self.writer.drain()

    async def recv(self, timeout: float = 5.0) -> dict:
        raw = await asyncio.wait_for(self.reader.readline(), timeout)
        assert raw, "connection closed"
        return json.loads(raw)

    async def recv_type(self, kind: str, timeout: float = 5.0) -> dict:
        deadline = asyncio.get_running_loop().time() + timeout
        while True:
            remaining = deadline - asyncio.get_running_loop().time()
            assert remaining > 0, f"no {kind!r} message arrived"
            message = await self.recv(remaining)
            if message["type"] == kind:
                return message

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except ConnectionError:
            pass


async def with_gateway(config, scenario) -> None:
    gateway = Gateway(config)
    await gateway.start()
    try:
        await scenario(gateway)
    finally:
        await gateway.stop()


def run(config, scenario) -> None:
    asyncio.run(with_gateway(config, scenario))


class TestTcp:
    def test_reset_returns_tick_zero_state(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "reset", "id": 1})
            ack = await client.recv_type("ack")
            assert ack["id"] == 1
            state = await client.recv_type("state")
            assert state["tick"] == 0
            assert state["outcome"] == "ongoing"
            assert [a["id"] for a in state["agents"]] == ["player", "opponent"]
            await client.close()

        run(fast_config(), scenario)

    def test_command_grafts_and_broadcasts(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "command", "agent": "player",
                               "text": "tackle", "id": "c1"})
            ack = await client.recv_type("ack")
            assert ack["id"] == "c1"
            graft = await client.recv_type("graft")
            assert graft["agent"] == "player"
            assert graft["rule"] == "PreemptSwitch"
            assert graft["script"] == '[{"node":"action","kind":"tackle"}]'
            assert graft["latency_ms"] >= 0
            await client.close()

        run(fast_config(), scenario)

    def test_loop_ending_condition_rule_over_wire(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "command", "text": "keep doing thunderbolt"})
            await client.recv_type("graft")
            await client.send({"type": "command", "text": "when opponent hp below 50 stop"})
            graft = await client.recv_type("graft")
            assert graft["rule"] == "LoopEndingCondition"
            await client.close()

        run(fast_config(), scenario)

    def test_empty_command_rejected(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "command", "text": "   "})
            error = await client.recv_type("error")
            assert "empty command" in error["message"]
            await client.close()

        run(fast_config(), scenario)

    def test_untranslatable_command_reports_error(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "command", "text": "dance a waltz"})
            error = await client.recv_type("error")
            assert "no translation" in error["message"]
            await client.close()

        run(fast_config(), scenario)

    def test_malformed_line_keeps_connection_open(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send("this is not json {")
            error = await client.recv_type("error")
            assert "malformed" in error["message"]
            await client.send({"type": "command", "text": "tackle"})
            await client.recv_type("graft")
            await client.close()

        run(fast_config(), scenario)

    def test_unknown_type_rejected(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "teleport"})
            error = await client.recv_type("error")
            assert "unknown message type" in error["message"]
            await client.close()

        run(fast_config(), scenario)

    def test_two_subscribers_both_receive_state(self):
        async def scenario(gateway):
            a = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            b = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            state_a = await a.recv_type("state")
            state_b = await b.recv_type("state")
            assert state_a["type"] == state_b["type"] == "state"
            await a.close()
            await b.close()

        run(fast_config(), scenario)

    def test_subscribe_narrows_channels(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "subscribe", "channels": ["branch"]})
            await client.recv_type("ack")
            # drain anything already queued before the subscription applied
            await asyncio.sleep(0.05)
            while True:
                try:
                    await asyncio.wait_for(client.reader.readline(), 0.05)
                except asyncio.TimeoutError:
                    break
            helper = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await helper.send({"type": "command", "text": "tackle"})
            message = await client.recv(timeout=5.0)
            assert message["type"] in ("graft", "branch")
            await client.close()
            await helper.close()

        run(fast_config(), scenario)

    def test_bad_subscribe_channels(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "subscribe", "channels": ["everything"]})
            error = await client.recv_type("error")
            assert "channels" in error["message"]
            await client.close()

        run(fast_config(), scenario)

    def test_command_to_scripted_opponent_rejected(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "command", "agent": "opponent", "text": "tackle"})
            error = await client.recv_type("error")
            assert "not branch-driven" in error["message"]
            await client.close()

        run(fast_config(opponent_policy="scripted"), scenario)

    def test_branch_message_carries_cursor(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await client.send({"type": "command", "text": "keep doing thunderbolt"})
            await client.recv_type("graft")
            branch = await client.recv_type("branch")
            assert branch["agent"] == "player"
            kinds = {n["kind"] for n in branch["nodes"]}
            assert kinds == {"repeat", "action"}
            assert branch["root"] is not None
            await client.close()

        run(fast_config(), scenario)


class TestWebSocket:
    def test_same_payloads_over_ws(self):
        async def scenario(gateway):
            async with ws_connect(f"ws://127.0.0.1:{gateway.ws_port}") as ws:
                await ws.send(json.dumps({"type": "command", "text": "tackle", "id": 7}))
                got_ack = got_graft = False
                for _ in range(50):
                    message = json.loads(await asyncio.wait_for(ws.recv(), 5.0))
                    if message["type"] == "ack":
                        got_ack = message["id"] == 7
                    if message["type"] == "graft":
                        got_graft = message["rule"] == "PreemptSwitch"
                        break
                assert got_ack and got_graft

        run(fast_config(), scenario)


class TestSchedule:
    def test_scheduled_commands_apply_at_ticks(self):
        # scheduled far enough out that the test client is connected by then
        schedule = (
            CommandRecord(50, "player", "keep doing thunderbolt",
                          '[{"node":"repeat","count":"forever"},{"node":"action","kind":"thunderbolt"}]'),
        )

        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            graft = await client.recv_type("graft")
            assert graft["latency_ms"] == 0.0
            # the loop produces projectiles visible in state broadcasts
            for _ in range(100):
                state = await client.recv_type("state")
                if state["projectiles"]:
                    break
            else:
                raise AssertionError("no projectiles appeared")
            await client.close()

        run(fast_config(schedule=schedule), scenario)


class TestBackpressure:
    def test_slow_client_drops_oldest(self):
        async def scenario(gateway):
            client = await TcpClient().connect("127.0.0.1", gateway.tcp_port)
            await asyncio.sleep(0.4)  # ~80 ticks at 200 Hz against a queue of 8
            session = next(iter(gateway.sessions.values()))
            assert session.queue.qsize() <= 8
            first = await client.recv_type("state")
            assert first["tick"] > 1  # the earliest states were dropped
            await client.close()

        run(fast_config(queue_size=8), scenario)
