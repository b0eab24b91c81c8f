"""Match runner: one world, a branch-driven player and a configurable
opponent, stepped in lockstep.

Grafts are applied between ticks only; the runner records every applied
command so a session can be replayed bit-for-bit from its log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import arena
from .actions import ActionRuntime, catalog
from .arena import OPPONENT, PLAYER, SimConfig, SimEvent, StateView
from .branch import (
    AgentIntent,
    Attack,
    BehaviorBranch,
    IDLE,
    Move,
    PerceptionView,
    Rotate,
    TickOutcome,
    new_branch,
)
from .graft import BranchFragment, GraftReport, graft
from .script import Script, compile_script, serialize

OPPONENT_POLICIES = ("scripted", "idle", "branch")


class MatchError(Exception):
    pass


def scripted_policy(view: PerceptionView, cfg: SimConfig) -> AgentIntent:
    """Built-in opponent: face the player, close in, use whichever attack
    fits the range.  Deterministic so a lone human has a sparring partner."""
    bearing = math.atan2(view.opponent_pose.y - view.self_pose.y,
                         view.opponent_pose.x - view.self_pose.x)
    err = (bearing - view.self_pose.facing + math.pi) % (2 * math.pi) - math.pi
    if abs(err) > cfg.face_tolerance:
        angular = max(-cfg.rotate_speed, min(cfg.rotate_speed, err / cfg.tick_len))
        return Rotate(angular)
    ready = lambda kind: view.self_cooldowns.get(kind, 0) <= 0
    if view.distance < cfg.iron_tail_range and ready("iron_tail"):
        return Attack("iron_tail")
    if view.distance < 2 * cfg.agent_radius + cfg.tackle_speed * cfg.tackle_duration \
            and ready("tackle"):
        return Attack("tackle")
    if ready("thunderbolt"):
        return Attack("thunderbolt")
    if view.distance > cfg.approach_stop:
        v = min(cfg.walk_speed, (view.distance - cfg.approach_stop) / cfg.tick_len)
        return Move(v * math.cos(bearing), v * math.sin(bearing))
    return IDLE


@dataclass(frozen=True)
class CommandRecord:
    """A graft as it was applied: enough to replay it without a translator."""
    tick: int
    agent: str
    text: str
    script: str  # canonical form


@dataclass(frozen=True)
class MatchTick:
    tick: int
    sim_events: tuple[SimEvent, ...]
    branch_outcomes: dict  # agent id -> TickOutcome (branch-driven agents only)


class Match:
    def __init__(self, config: SimConfig | None = None, seed: int = 0,
                 opponent_policy: str = "scripted"):
        if opponent_policy not in OPPONENT_POLICIES:
            raise MatchError(f"unknown opponent policy {opponent_policy!r}")
        self.config = config or SimConfig()
        self.seed = seed
        self.opponent_policy = opponent_policy
        self.world = arena.init(self.config, seed)
        self.runtime = ActionRuntime(self.config)
        self.branches: dict[str, BehaviorBranch] = {PLAYER: new_branch()}
        if opponent_policy == "branch":
            self.branches[OPPONENT] = new_branch()
        self.commands: list[CommandRecord] = []

    @property
    def tick_count(self) -> int:
        return self.world.tick

    @property
    def finished(self) -> bool:
        return self.world.outcome != "ongoing"

    def snapshot(self) -> StateView:
        return arena.snapshot(self.world)

    def graft_script(self, agent: str, script: Script, text: str = "") -> GraftReport:
        """Compile and graft between ticks; the applied command is recorded
        with the current tick so replays land it on the same boundary."""
        if self.finished:
            raise MatchError("match already finished")
        if agent not in self.branches:
            raise MatchError(f"agent {agent!r} is not branch-driven")
        fragment = compile_script(script, catalog())
        report = graft(self.branches[agent], fragment)
        self.commands.append(CommandRecord(self.world.tick, agent, text, serialize(script)))
        return report

    def graft_fragment(self, agent: str, fragment: BranchFragment) -> GraftReport:
        if agent not in self.branches:
            raise MatchError(f"agent {agent!r} is not branch-driven")
        return graft(self.branches[agent], fragment)

    def tick(self) -> MatchTick:
        if self.finished:
            raise MatchError("match already finished")
        snap = self.snapshot()
        intents: dict[str, AgentIntent] = {}
        outcomes: dict[str, TickOutcome] = {}
        for agent, branch in self.branches.items():
            view = arena.perception_for(snap, agent)
            outcome = branch.tick(view, self.runtime)
            intents[agent] = outcome.intent
            outcomes[agent] = outcome
        if self.opponent_policy == "scripted":
            view = arena.perception_for(snap, OPPONENT)
            intents[OPPONENT] = scripted_policy(view, self.config)
        elif self.opponent_policy == "idle":
            intents[OPPONENT] = IDLE
        sim_events = tuple(arena.step(self.world, intents))
        return MatchTick(self.world.tick, sim_events, outcomes)

    def run(self, ticks: int) -> list[MatchTick]:
        out = []
        for _ in range(ticks):
            if self.finished:
                break
            out.append(self.tick())
        return out
