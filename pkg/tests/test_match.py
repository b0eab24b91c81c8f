"""Match loop and replay: full-stack determinism over the in-process API."""
from __future__ import annotations

import hashlib

import pytest

from graftarena.arena import SimConfig
from graftarena.match import CommandRecord, Match, MatchError, scripted_policy
from graftarena.replaylog import (
    LogError,
    LogVersionError,
    SessionLog,
    dump_log,
    load_log,
    log_from_match,
    replay,
    run_traced,
)
from graftarena.translator import translate_rule_based

from conftest import make_view


def graft_text(match: Match, text: str, agent: str = "player"):
    return match.graft_script(agent, translate_rule_based(text), text)


class TestMatch:
    def test_keep_doing_thunderbolt_spawns_repeatedly(self):
        match = Match(opponent_policy="idle", seed=1)
        graft_text(match, "Keep doing thunderbolt")
        launches = 0
        for result in match.run(200):
            launches += sum(1 for e in result.sim_events
                            if e.name == "attack" and e.data["agent"] == "player")
        assert launches > 3

    def test_repeat_three_spawns_exactly_three(self):
        match = Match(opponent_policy="idle", seed=1)
        graft_text(match, "do thunderbolt 3 times")
        launches = 0
        for result in match.run(400):
            launches += sum(1 for e in result.sim_events
                            if e.name == "attack" and e.data["agent"] == "player")
        assert launches == 3

    def test_opponent_scripted_policy_fights_back(self):
        match = Match(seed=1)  # scripted opponent, idle player branch
        damage_to_player = 0
        for result in match.run(400):
            damage_to_player += sum(e.data["damage"] for e in result.sim_events
                                    if e.name == "hit" and e.data["agent"] == "player")
        assert damage_to_player > 0
        assert match.finished and match.world.outcome == "opponent"

    def test_graft_after_finish_rejected(self):
        match = Match(opponent_policy="scripted", seed=1)
        while not match.finished:
            match.tick()
        with pytest.raises(MatchError):
            graft_text(match, "tackle")

    def test_opponent_branch_policy(self):
        match = Match(opponent_policy="branch", seed=1)
        graft_text(match, "move backward", agent="opponent")
        start = match.snapshot().agent("opponent").x
        match.run(10)
        assert match.snapshot().agent("opponent").x > start

    def test_command_to_non_branch_agent_rejected(self):
        match = Match(opponent_policy="scripted", seed=1)
        with pytest.raises(MatchError):
            graft_text(match, "tackle", agent="opponent")

    def test_scripted_policy_is_deterministic(self, config):
        view = make_view(distance=3.0)
        assert scripted_policy(view, config) == scripted_policy(view, config)


SCHEDULE = (
    CommandRecord(0, "player", "Keep doing thunderbolt",
                  '[{"node":"repeat","count":"forever"},{"node":"action","kind":"thunderbolt"}]'),
    CommandRecord(30, "player", "when opponent hp below 70 stop",
                  '[{"node":"condition","kind":"opponent_hp_below","params":{"value":70},'
                  '"true":[{"node":"action","kind":"idle"}]}]'),
    CommandRecord(120, "player", "then escape",
                  '[{"node":"then"},{"node":"action","kind":"retreat_from_opponent"}]'),
)


class TestTrace:
    def test_run_traced_is_deterministic(self):
        def once():
            match = Match(SimConfig(), seed=5, opponent_policy="idle")
            return run_traced(match, 300, SCHEDULE)
        assert once() == once()

    def test_trace_contains_graft_and_event_lines(self):
        match = Match(SimConfig(), seed=5, opponent_policy="idle")
        trace = run_traced(match, 100, SCHEDULE[:1])
        assert '"type":"graft"' in trace
        assert '"type":"event"' in trace
        assert trace.count('"type":"state"') == 101  # initial + one per tick


class TestReplay:
    def make_log(self) -> SessionLog:
        return SessionLog(SimConfig(), 5, "idle", 300, SCHEDULE)

    def test_replay_twice_identical(self):
        log = self.make_log()
        first = replay(log)
        second = replay(log)
        assert hashlib.sha256(first.encode()).hexdigest() == \
            hashlib.sha256(second.encode()).hexdigest()

    def test_live_session_replays_identically(self):
        # run live, log, replay: the trace must match the live trace
        match = Match(SimConfig(), seed=5, opponent_policy="idle")
        live = run_traced(match, 300, SCHEDULE)
        log = log_from_match(match, 300)
        assert replay(load_log(dump_log(log))) == live

    def test_zero_command_log(self):
        log = SessionLog(SimConfig(), 9, "scripted", 50, ())
        trace = replay(log)
        assert trace.count('"type":"state"') == 51
        assert '"type":"graft"' not in trace

    def test_log_round_trip(self):
        log = self.make_log()
        assert load_log(dump_log(log)) == log

    def test_version_mismatch(self):
        text = dump_log(self.make_log()).replace('"version":1', '"version":9', 1)
        with pytest.raises(LogVersionError):
            load_log(text)

    def test_truncated_log_names_byte_offset(self):
        text = dump_log(self.make_log())
        truncated = text[:len(text) - 30]
        with pytest.raises(LogError) as err:
            load_log(truncated)
        assert "byte offset" in str(err.value)

    def test_empty_log(self):
        with pytest.raises(LogError):
            load_log("")
