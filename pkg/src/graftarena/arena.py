"""Deterministic fixed-timestep 2D duel arena.

Two agents on a continuous plane trade three attack kinds (a straight
dash, a projectile, a spin) until one side's HP reaches zero.  Positions
are stored as integer nanometers so constant-velocity motion integrates
exactly and full state traces replay byte-for-byte; every interface
speaks plain float meters.

Sub-step order inside one tick is fixed for reproducibility:
movement -> projectile advance -> attack execution -> contacts -> damage
-> outcome.  New projectiles therefore take their first movement step on
the tick after they spawn.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .branch import AgentIntent, Attack, Idle, Move, Pose, PerceptionView, Rotate

NM = 10**9  # nanometers per meter

TAU = 2.0 * math.pi

PLAYER = "player"
OPPONENT = "opponent"
AGENT_IDS = (PLAYER, OPPONENT)

ATTACK_KINDS = ("tackle", "thunderbolt", "iron_tail")


class ArenaError(Exception):
    pass


class InvalidConfigError(ArenaError):
    pass


class WorldFinishedError(ArenaError):
    """step() was called on a world whose outcome is already decided."""


def to_nm(meters: float) -> int:
    return round(meters * NM)


def to_m(nanometers: int) -> float:
    return nanometers / NM


@dataclass(frozen=True)
class SimConfig:
    arena_half_extent: float = 10.0
    tick_len: float = 0.05
    initial_hp: int = 100
    walk_speed: float = 3.0
    rotate_speed: float = math.pi
    tackle_speed: float = 10.0
    tackle_duration: float = 0.5
    bolt_speed: float = 8.0
    bolt_radius: float = 0.3
    iron_tail_range: float = 1.5
    attack_cooldown: float = 1.0
    default_action_duration: float = 1.0
    agent_radius: float = 0.5
    spawn_distance: float = 6.0
    approach_stop: float = 1.5
    retreat_distance: float = 6.0
    face_tolerance: float = 0.1
    go_behind_offset: float = 1.5
    go_behind_tolerance: float = 0.25
    damage: dict = field(default_factory=lambda: {"tackle": 10, "thunderbolt": 8, "iron_tail": 12})

    def validate(self) -> None:
        positive = (
            "arena_half_extent", "tick_len", "initial_hp", "walk_speed",
            "rotate_speed", "tackle_speed", "tackle_duration", "bolt_speed",
            "bolt_radius", "iron_tail_range", "attack_cooldown",
            "default_action_duration", "agent_radius", "spawn_distance",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name} must be positive")
        for kind in ATTACK_KINDS:
            if self.damage.get(kind, 0) <= 0:
                raise InvalidConfigError(f"damage[{kind}] must be positive")
        if self.spawn_distance >= 2 * self.arena_half_extent:
            raise InvalidConfigError("spawn distance does not fit in the arena")

    @property
    def cooldown_ticks(self) -> int:
        return round(self.attack_cooldown / self.tick_len)

    @property
    def dash_ticks(self) -> int:
        return round(self.tackle_duration / self.tick_len)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "arena_half_extent", "tick_len", "initial_hp", "walk_speed",
            "rotate_speed", "tackle_speed", "tackle_duration", "bolt_speed",
            "bolt_radius", "iron_tail_range", "attack_cooldown",
            "default_action_duration", "agent_radius", "spawn_distance",
            "approach_stop", "retreat_distance", "face_tolerance",
            "go_behind_offset", "go_behind_tolerance",
        )}
        out["damage"] = dict(self.damage)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        cfg = cls(**raw)
        cfg.validate()
        return cfg


@dataclass
class AgentState:
    id: str
    x_nm: int
    y_nm: int
    facing: float
    hp: int
    cooldowns: dict = field(default_factory=dict)  # attack kind -> remaining ticks
    dash_ticks: int = 0
    dash_dx_nm: int = 0
    dash_dy_nm: int = 0
    dash_hit: bool = False

    @property
    def x(self) -> float:
        return to_m(self.x_nm)

    @property
    def y(self) -> float:
        return to_m(self.y_nm)

    @property
    def dashing(self) -> bool:
        return self.dash_ticks > 0


@dataclass
class Projectile:
    owner: str
    x_nm: int
    y_nm: int
    dx_nm: int
    dy_nm: int
    radius: float

    @property
    def x(self) -> float:
        return to_m(self.x_nm)

    @property
    def y(self) -> float:
        return to_m(self.y_nm)


@dataclass(frozen=True)
class SimEvent:
    name: str  # attack | hit | projectile-removed | ended
    tick: int
    data: dict


@dataclass
class WorldState:
    config: SimConfig
    seed: int
    tick: int
    agents: dict
    projectiles: list
    rng: random.Random
    outcome: str = "ongoing"  # ongoing | player | opponent | draw


def init(config: SimConfig, seed: int) -> WorldState:
    """Mirrored spawn points facing each other, full HP, tick 0.  The rng
    is seeded but nothing in the core mechanics draws from it."""
    config.validate()
    half = to_nm(config.spawn_distance) // 2
    player = AgentState(PLAYER, -half, 0, 0.0, config.initial_hp)
    opponent = AgentState(OPPONENT, half, 0, math.pi, config.initial_hp)
    return WorldState(
        config=config,
        seed=seed,
        tick=0,
        agents={PLAYER: player, OPPONENT: opponent},
        projectiles=[],
        rng=random.Random(seed),
    )


def _normalize(angle: float) -> float:
    return angle % TAU


def _clamp_nm(value: int, limit: int) -> int:
    return max(-limit, min(limit, value))


def agent_distance(world: WorldState) -> float:
    a = world.agents[PLAYER]
    b = world.agents[OPPONENT]
    return math.dist((a.x, a.y), (b.x, b.y))


def step(world: WorldState, intents: dict[str, AgentIntent]) -> list[SimEvent]:
    """Advance the world one tick, consuming one intent per agent."""
    if world.outcome != "ongoing":
        raise WorldFinishedError(f"world already decided: {world.outcome}")
    cfg = world.config
    dt = cfg.tick_len
    world.tick += 1
    tick = world.tick
    events: list[SimEvent] = []
    limit = to_nm(cfg.arena_half_extent)
    triggers: list[tuple[str, str]] = []

    for aid in AGENT_IDS:
        agent = world.agents[aid]
        for kind in list(agent.cooldowns):
            agent.cooldowns[kind] -= 1
            if agent.cooldowns[kind] <= 0:
                del agent.cooldowns[kind]

    # movement (attack-driven dash movement overrides the intent)
    for aid in AGENT_IDS:
        agent = world.agents[aid]
        intent = intents.get(aid, Idle())
        if agent.dashing:
            agent.x_nm = _clamp_nm(agent.x_nm + agent.dash_dx_nm, limit)
            agent.y_nm = _clamp_nm(agent.y_nm + agent.dash_dy_nm, limit)
            agent.dash_ticks -= 1
        elif isinstance(intent, Move):
            vx, vy = intent.vx, intent.vy
            speed = math.hypot(vx, vy)
            if speed > cfg.walk_speed and speed > 0:
                scale = cfg.walk_speed / speed
                vx, vy = vx * scale, vy * scale
            agent.x_nm = _clamp_nm(agent.x_nm + to_nm(vx * dt), limit)
            agent.y_nm = _clamp_nm(agent.y_nm + to_nm(vy * dt), limit)
        elif isinstance(intent, Rotate):
            angular = max(-cfg.rotate_speed, min(cfg.rotate_speed, intent.angular))
            agent.facing = _normalize(agent.facing + angular * dt)
        elif isinstance(intent, Attack):
            triggers.append((aid, intent.kind))

    # advance existing projectiles; new ones spawn after this phase so their
    # first movement lands on the next tick
    kept = []
    for proj in world.projectiles:
        proj.x_nm += proj.dx_nm
        proj.y_nm += proj.dy_nm
        if abs(proj.x_nm) > limit or abs(proj.y_nm) > limit:
            events.append(SimEvent("projectile-removed", tick, {"owner": proj.owner, "reason": "bounds"}))
        else:
            kept.append(proj)
    world.projectiles = kept

    # attack execution
    pulses: list[str] = []
    for aid, kind in triggers:
        agent = world.agents[aid]
        if kind not in ATTACK_KINDS or agent.cooldowns.get(kind, 0) > 0 or agent.dashing:
            continue
        agent.cooldowns[kind] = cfg.cooldown_ticks
        events.append(SimEvent("attack", tick, {"agent": aid, "kind": kind}))
        if kind == "tackle":
            agent.dash_ticks = cfg.dash_ticks
            agent.dash_dx_nm = to_nm(math.cos(agent.facing) * cfg.tackle_speed * dt)
            agent.dash_dy_nm = to_nm(math.sin(agent.facing) * cfg.tackle_speed * dt)
            agent.dash_hit = False
        elif kind == "thunderbolt":
            world.projectiles.append(Projectile(
                owner=aid,
                x_nm=agent.x_nm,
                y_nm=agent.y_nm,
                dx_nm=to_nm(math.cos(agent.facing) * cfg.bolt_speed * dt),
                dy_nm=to_nm(math.sin(agent.facing) * cfg.bolt_speed * dt),
                radius=cfg.bolt_radius,
            ))
        else:
            pulses.append(aid)

    # contacts
    damage = {PLAYER: 0, OPPONENT: 0}

    def other(aid: str) -> str:
        return OPPONENT if aid == PLAYER else PLAYER

    kept = []
    for proj in world.projectiles:
        target = world.agents[other(proj.owner)]
        if math.dist((proj.x, proj.y), (target.x, target.y)) < proj.radius:
            damage[target.id] += cfg.damage["thunderbolt"]
            events.append(SimEvent("hit", tick, {"agent": target.id, "kind": "thunderbolt",
                                                 "by": proj.owner, "damage": cfg.damage["thunderbolt"]}))
        else:
            kept.append(proj)
    world.projectiles = kept

    for aid in AGENT_IDS:
        agent = world.agents[aid]
        if agent.dashing and not agent.dash_hit:
            target = world.agents[other(aid)]
            if math.dist((agent.x, agent.y), (target.x, target.y)) < 2 * cfg.agent_radius:
                damage[target.id] += cfg.damage["tackle"]
                agent.dash_hit = True
                agent.dash_ticks = 0  # body contact ends the dash
                events.append(SimEvent("hit", tick, {"agent": target.id, "kind": "tackle",
                                                     "by": aid, "damage": cfg.damage["tackle"]}))

    for aid in pulses:
        agent = world.agents[aid]
        target = world.agents[other(aid)]
        if math.dist((agent.x, agent.y), (target.x, target.y)) < cfg.iron_tail_range:
            damage[target.id] += cfg.damage["iron_tail"]
            events.append(SimEvent("hit", tick, {"agent": target.id, "kind": "iron_tail",
                                                 "by": aid, "damage": cfg.damage["iron_tail"]}))

    # damage, then outcome
    for aid in AGENT_IDS:
        if damage[aid]:
            agent = world.agents[aid]
            agent.hp = max(0, agent.hp - damage[aid])

    dead = [aid for aid in AGENT_IDS if world.agents[aid].hp == 0]
    if dead:
        if len(dead) == 2:
            world.outcome = "draw"
        else:
            world.outcome = other(dead[0])
        events.append(SimEvent("ended", tick, {"outcome": world.outcome}))
    return events


# --------------------------------------------------------------------------
# Snapshots and perception.

@dataclass(frozen=True)
class AgentView:
    id: str
    x: float
    y: float
    facing: float
    hp: int
    cooldowns: tuple  # ((kind, remaining_ticks), ...) sorted by kind


@dataclass(frozen=True)
class ProjectileView:
    owner: str
    x: float
    y: float


@dataclass(frozen=True)
class StateView:
    tick: int
    outcome: str
    agents: tuple
    projectiles: tuple

    def agent(self, aid: str) -> AgentView:
        for view in self.agents:
            if view.id == aid:
                return view
        raise KeyError(aid)

    def to_state_message(self) -> dict:
        return {
            "type": "state",
            "tick": self.tick,
            "agents": [
                {"id": a.id, "x": a.x, "y": a.y, "facing": a.facing, "hp": a.hp}
                for a in self.agents
            ],
            "projectiles": [{"x": p.x, "y": p.y} for p in self.projectiles],
            "outcome": self.outcome,
        }


def snapshot(world: WorldState) -> StateView:
    agents = tuple(
        AgentView(
            id=a.id, x=a.x, y=a.y, facing=a.facing, hp=a.hp,
            cooldowns=tuple(sorted(a.cooldowns.items())),
        )
        for a in (world.agents[PLAYER], world.agents[OPPONENT])
    )
    projectiles = tuple(ProjectileView(p.owner, p.x, p.y) for p in world.projectiles)
    return StateView(world.tick, world.outcome, agents, projectiles)


def perception_for(view: StateView, aid: str) -> PerceptionView:
    me = view.agent(aid)
    foe = view.agent(OPPONENT if aid == PLAYER else PLAYER)
    return PerceptionView(
        self_pose=Pose(me.x, me.y, me.facing),
        opponent_pose=Pose(foe.x, foe.y, foe.facing),
        self_hp=me.hp,
        opponent_hp=foe.hp,
        distance=math.dist((me.x, me.y), (foe.x, foe.y)),
        tick=view.tick,
        projectiles=tuple((p.x, p.y) for p in view.projectiles),
        self_cooldowns=dict(me.cooldowns),
    )
