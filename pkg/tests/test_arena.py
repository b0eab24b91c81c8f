"""Simulator: spawn, kinematics exactness, attack mechanics, determinism."""
from __future__ import annotations

import dataclasses
import json
import math

import pytest

from graftarena.arena import (
    NM,
    InvalidConfigError,
    SimConfig,
    WorldFinishedError,
    agent_distance,
    init,
    perception_for,
    snapshot,
    step,
)
from graftarena.branch import Attack, Move, Rotate

CFG = SimConfig()


def run_ticks(world, player_intents):
    events = []
    for intent in player_intents:
        events.extend(step(world, {"player": intent}))
    return events


class TestInit:
    def test_mirrored_spawn(self):
        world = init(CFG, seed=7)
        assert world.agents["player"].hp == CFG.initial_hp
        assert world.agents["opponent"].hp == CFG.initial_hp
        assert agent_distance(world) == CFG.spawn_distance
        assert world.agents["player"].facing == 0.0
        assert world.agents["opponent"].facing == math.pi
        assert world.tick == 0

    def test_same_seed_identical(self):
        a, b = init(CFG, seed=3), init(CFG, seed=3)
        assert snapshot(a) == snapshot(b)

    def test_seed_only_touches_rng(self):
        a, b = init(CFG, seed=1), init(CFG, seed=2)
        assert snapshot(a) == snapshot(b)

    def test_invalid_config(self):
        with pytest.raises(InvalidConfigError):
            init(dataclasses.replace(CFG, tick_len=0.0), seed=0)
        with pytest.raises(InvalidConfigError):
            init(dataclasses.replace(CFG, spawn_distance=50.0), seed=0)

    def test_config_round_trip(self):
        assert SimConfig.from_dict(CFG.to_dict()) == CFG


class TestKinematics:
    def test_null_step_only_advances_tick(self):
        world = init(CFG, seed=0)
        before = snapshot(world)
        events = step(world, {})
        after = snapshot(world)
        assert events == []
        assert after.tick == before.tick + 1
        assert after.agents == before.agents and after.projectiles == ()

    def test_walk_three_meters_exactly(self):
        # Oracle: closed form, 3 m/s * (20 * 0.05 s) = 3.0 m, exact.
        world = init(CFG, seed=0)
        world.agents["player"].x_nm = 0
        world.agents["player"].y_nm = 0
        run_ticks(world, [Move(3.0, 0.0)] * 20)
        assert world.agents["player"].x == 3.0
        assert world.agents["player"].y == 0.0

    def test_speed_clamped_to_walk_speed(self):
        world = init(CFG, seed=0)
        start = world.agents["player"].x_nm
        step(world, {"player": Move(100.0, 0.0)})
        moved = (world.agents["player"].x_nm - start) / NM
        assert moved == pytest.approx(CFG.walk_speed * CFG.tick_len, abs=1e-9)

    def test_rotation_normalized(self):
        world = init(CFG, seed=0)
        run_ticks(world, [Rotate(math.pi)] * 45)  # 2.25 s of full-speed turning
        facing = world.agents["player"].facing
        assert 0.0 <= facing < 2 * math.pi

    def test_bounds_clamp(self):
        world = init(CFG, seed=0)
        run_ticks(world, [Move(-3.0, 0.0)] * 200)
        assert world.agents["player"].x == -CFG.arena_half_extent


class TestThunderbolt:
    def test_hit_timeline_and_damage(self):
        # Hand timeline with the defaults: opponent 4 m ahead, bolt at
        # 8 m/s covers 0.4 m per tick, first advancing the tick after it
        # spawns; contact once within its 0.3 m radius.  Spawn at tick 1
        # -> hit on tick 11 (the 10th tick after spawn), hp 100 -> 92.
        world = init(dataclasses.replace(CFG, spawn_distance=4.0), seed=0)
        events = step(world, {"player": Attack("thunderbolt")})
        assert [e.name for e in events] == ["attack"]
        assert events[0].tick == 1
        hit_tick = None
        for _ in range(30):
            for event in step(world, {}):
                if event.name == "hit":
                    hit_tick = event.tick
            if hit_tick is not None:
                break
        assert hit_tick == 11
        assert world.agents["opponent"].hp == 92
        assert world.projectiles == []

    def test_cooldown_blocks_second_launch(self):
        world = init(CFG, seed=0)
        first = step(world, {"player": Attack("thunderbolt")})
        second = step(world, {"player": Attack("thunderbolt")})
        assert any(e.name == "attack" for e in first)
        assert not any(e.name == "attack" for e in second)
        # ready again after the cooldown runs out
        for _ in range(CFG.cooldown_ticks):
            step(world, {})
        third = step(world, {"player": Attack("thunderbolt")})
        assert any(e.name == "attack" for e in third)

    def test_missed_bolt_leaves_arena(self):
        world = init(CFG, seed=0)
        world.agents["player"].facing = math.pi  # fire away from the opponent
        step(world, {"player": Attack("thunderbolt")})
        removed = []
        bound = math.ceil(2 * CFG.arena_half_extent / (CFG.bolt_speed * CFG.tick_len))
        for _ in range(bound + 1):
            removed.extend(e for e in step(world, {}) if e.name == "projectile-removed")
        assert removed and world.projectiles == []


class TestTackle:
    def test_dash_contact_damage(self):
        # Distance 2.0, dash 0.5 m per tick, contact below 1.0 m:
        # trigger on tick 1, dash steps on ticks 2-4 close to 1.5, 1.0,
        # then 0.5 m -> body contact on tick 4.
        world = init(dataclasses.replace(CFG, spawn_distance=2.0), seed=0)
        step(world, {"player": Attack("tackle")})
        hit = None
        for _ in range(10):
            for event in step(world, {}):
                if event.name == "hit":
                    hit = event
            if hit:
                break
        assert hit is not None and hit.tick == 4
        assert hit.data["kind"] == "tackle"
        assert world.agents["opponent"].hp == CFG.initial_hp - CFG.damage["tackle"]
        assert not world.agents["player"].dashing  # contact ends the dash

    def test_dash_expires_without_contact(self):
        world = init(CFG, seed=0)  # 6 m apart, dash covers 5 m
        step(world, {"player": Attack("tackle")})
        for _ in range(CFG.dash_ticks + 2):
            step(world, {})
        assert world.agents["opponent"].hp == CFG.initial_hp
        assert not world.agents["player"].dashing


class TestIronTail:
    def test_hits_within_range(self):
        world = init(dataclasses.replace(CFG, spawn_distance=1.2), seed=0)
        events = step(world, {"player": Attack("iron_tail")})
        assert any(e.name == "hit" and e.data["kind"] == "iron_tail" for e in events)
        assert world.agents["opponent"].hp == CFG.initial_hp - CFG.damage["iron_tail"]

    def test_misses_out_of_range(self):
        world = init(dataclasses.replace(CFG, spawn_distance=1.8), seed=0)
        events = step(world, {"player": Attack("iron_tail")})
        assert any(e.name == "attack" for e in events)
        assert not any(e.name == "hit" for e in events)


class TestEnding:
    def test_hp_floor_and_winner(self):
        world = init(dataclasses.replace(CFG, spawn_distance=1.2), seed=0)
        world.agents["opponent"].hp = 5
        events = step(world, {"player": Attack("iron_tail")})
        assert world.agents["opponent"].hp == 0
        assert world.outcome == "player"
        assert any(e.name == "ended" and e.data["outcome"] == "player" for e in events)

    def test_simultaneous_depletion_is_draw(self):
        world = init(dataclasses.replace(CFG, spawn_distance=4.0), seed=0)
        world.agents["player"].hp = 8
        world.agents["opponent"].hp = 8
        step(world, {"player": Attack("thunderbolt"), "opponent": Attack("thunderbolt")})
        while world.outcome == "ongoing":
            step(world, {})
        assert world.outcome == "draw"

    def test_step_after_end_raises(self):
        world = init(dataclasses.replace(CFG, spawn_distance=1.2), seed=0)
        world.agents["opponent"].hp = 1
        step(world, {"player": Attack("iron_tail")})
        with pytest.raises(WorldFinishedError):
            step(world, {})

    def test_hp_never_increases(self):
        world = init(dataclasses.replace(CFG, spawn_distance=3.0), seed=0)
        last = (100, 100)
        intents = [Attack("tackle"), Attack("iron_tail"), Attack("thunderbolt")]
        for t in range(200):
            if world.outcome != "ongoing":
                break
            step(world, {"player": intents[t % 3], "opponent": Attack("tackle")})
            now = (world.agents["player"].hp, world.agents["opponent"].hp)
            assert now[0] <= last[0] and now[1] <= last[1]
            last = now


class TestSnapshots:
    def test_snapshot_is_immutable_copy(self):
        world = init(CFG, seed=0)
        snap = snapshot(world)
        step(world, {"player": Move(3.0, 0.0)})
        assert snap.tick == 0
        assert snap.agents[0].x == world.agents["player"].x - CFG.walk_speed * CFG.tick_len

    def test_perception_distance_consistent(self):
        world = init(CFG, seed=0)
        view = perception_for(snapshot(world), "player")
        assert view.distance == CFG.spawn_distance
        assert view.opponent_hp == CFG.initial_hp

    def test_perception_swaps_sides(self):
        world = init(CFG, seed=0)
        snap = snapshot(world)
        player_view = perception_for(snap, "player")
        opponent_view = perception_for(snap, "opponent")
        assert player_view.self_pose == opponent_view.opponent_pose
        assert player_view.opponent_pose == opponent_view.self_pose

    def test_state_message_schema(self):
        snap = snapshot(init(CFG, seed=0))
        msg = snap.to_state_message()
        assert msg["type"] == "state" and msg["tick"] == 0
        assert [a["id"] for a in msg["agents"]] == ["player", "opponent"]
        assert set(msg["agents"][0]) == {"id", "x", "y", "facing", "hp"}
        assert msg["outcome"] == "ongoing"


def test_trace_determinism():
    def trace():
        world = init(CFG, seed=11)
        lines = [json.dumps(snapshot(world).to_state_message())]
        schedule = [Move(2.0, 1.0)] * 5 + [Attack("thunderbolt")] + [Rotate(1.0)] * 5 \
            + [Attack("tackle")] + [Move(-3.0, 0.0)] * 20
        for intent in schedule:
            step(world, {"player": intent, "opponent": Move(-1.0, 0.5)})
            lines.append(json.dumps(snapshot(world).to_state_message()))
        return "\n".join(lines)

    assert trace() == trace()
