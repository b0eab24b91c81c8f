"""Catalog of concrete action and condition kinds.

Nine actions cover the command families the runtime supports: directional
movement, approach/retreat/go-behind, facing, idling and the three attack
kinds.  Six condition predicates cover distance, HP, facing and elapsed
time.  Attack steppers watch their own cooldown through the perception
view, so a launch they report as satisfied is one the simulator actually
executes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .arena import SimConfig
from .branch import AgentIntent, Attack, IDLE, Move, PerceptionView, Rotate

ONE_SHOT = "one_shot"
REACH_TARGET = "reach_target"
DURATION = "duration"


class UnknownKindError(KeyError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    type: str  # number | string
    required: bool = False
    default: object = None
    choices: tuple = ()


@dataclass(frozen=True)
class ActionDescriptor:
    kind: str
    params: dict
    satisfaction: str  # ONE_SHOT | REACH_TARGET | DURATION


@dataclass(frozen=True)
class ConditionDescriptor:
    kind: str
    params: dict


@dataclass(frozen=True)
class Catalog:
    actions: dict
    conditions: dict


_DIRECTIONS = {"forward": 0.0, "left": math.pi / 2, "backward": math.pi, "right": -math.pi / 2}

_CATALOG = Catalog(
    actions={
        "move_direction": ActionDescriptor("move_direction", {
            "dir": ParamSpec("string", required=True, choices=tuple(_DIRECTIONS)),
            "duration": ParamSpec("number"),
        }, DURATION),
        "approach_opponent": ActionDescriptor("approach_opponent", {
            "stop_distance": ParamSpec("number"),
        }, REACH_TARGET),
        "retreat_from_opponent": ActionDescriptor("retreat_from_opponent", {
            "distance": ParamSpec("number"),
        }, REACH_TARGET),
        "go_behind_opponent": ActionDescriptor("go_behind_opponent", {
            "offset": ParamSpec("number"),
        }, REACH_TARGET),
        "face_opponent": ActionDescriptor("face_opponent", {
            "tolerance": ParamSpec("number"),
        }, REACH_TARGET),
        "idle": ActionDescriptor("idle", {}, DURATION),
        "tackle": ActionDescriptor("tackle", {}, ONE_SHOT),
        "thunderbolt": ActionDescriptor("thunderbolt", {}, ONE_SHOT),
        "iron_tail": ActionDescriptor("iron_tail", {}, ONE_SHOT),
    },
    conditions={
        "distance_below": ConditionDescriptor("distance_below", {
            "value": ParamSpec("number", required=True),
        }),
        "distance_above": ConditionDescriptor("distance_above", {
            "value": ParamSpec("number", required=True),
        }),
        "self_hp_below": ConditionDescriptor("self_hp_below", {
            "value": ParamSpec("number", required=True),
        }),
        "opponent_hp_below": ConditionDescriptor("opponent_hp_below", {
            "value": ParamSpec("number", required=True),
        }),
        "opponent_in_front": ConditionDescriptor("opponent_in_front", {
            "tolerance": ParamSpec("number"),
        }),
        "elapsed_ticks": ConditionDescriptor("elapsed_ticks", {
            "ticks": ParamSpec("number", required=True),
        }),
    },
)


def catalog() -> Catalog:
    """The full descriptor set; one instance per process."""
    return _CATALOG


def catalog_document() -> dict:
    """Machine-readable catalog export for protocol clients and prompt
    construction (same JSON conventions as the script format)."""
    def params_doc(params: dict) -> dict:
        out = {}
        for name, spec in sorted(params.items()):
            entry: dict = {"type": spec.type, "required": spec.required}
            if spec.choices:
                entry["choices"] = sorted(spec.choices)
            out[name] = entry
        return out

    return {
        "actions": {
            k: {"params": params_doc(d.params), "satisfaction": d.satisfaction}
            for k, d in sorted(_CATALOG.actions.items())
        },
        "conditions": {
            k: {"params": params_doc(d.params)}
            for k, d in sorted(_CATALOG.conditions.items())
        },
    }


def _wrap(angle: float) -> float:
    """Map an angle difference into [-pi, pi)."""
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _bearing(view: PerceptionView) -> float:
    return math.atan2(
        view.opponent_pose.y - view.self_pose.y,
        view.opponent_pose.x - view.self_pose.x,
    )


def _toward(view: PerceptionView, tx: float, ty: float, speed: float, dt: float) -> Move:
    dx = tx - view.self_pose.x
    dy = ty - view.self_pose.y
    dist = math.hypot(dx, dy)
    if dist == 0:
        return Move(0.0, 0.0)
    # final step shrinks so we land on the target instead of oscillating
    v = min(speed, dist / dt)
    return Move(v * dx / dist, v * dy / dist)


def _turn_toward(err: float, cfg: SimConfig) -> Rotate:
    angular = max(-cfg.rotate_speed, min(cfg.rotate_speed, err / cfg.tick_len))
    return Rotate(angular)


def _cooldown_ready(view: PerceptionView, kind: str) -> bool:
    return view.self_cooldowns.get(kind, 0) <= 0


def step_action(kind: str, params: dict, progress: dict, view: PerceptionView,
                dt: float, cfg: SimConfig) -> tuple[AgentIntent, bool]:
    """One tick of the named action.  ``progress`` is the per-activation
    scratch dict owned by the calling branch node; satisfaction latches."""
    if kind not in _CATALOG.actions:
        raise UnknownKindError(kind)
    if progress.get("done"):
        return IDLE, True

    if kind == "idle":
        progress["done"] = True
        return IDLE, True

    if kind == "move_direction":
        duration = float(params.get("duration", cfg.default_action_duration))
        angle = view.self_pose.facing + _DIRECTIONS[params["dir"]]
        ticks = progress.get("ticks", 0) + 1
        progress["ticks"] = ticks
        satisfied = ticks * dt >= duration
        if satisfied:
            progress["done"] = True
        return Move(cfg.walk_speed * math.cos(angle), cfg.walk_speed * math.sin(angle)), satisfied

    if kind == "approach_opponent":
        stop = float(params.get("stop_distance", cfg.approach_stop))
        if view.distance <= stop:
            progress["done"] = True
            return IDLE, True
        bearing = _bearing(view)
        v = min(cfg.walk_speed, (view.distance - stop) / dt)
        return Move(v * math.cos(bearing), v * math.sin(bearing)), False

    if kind == "retreat_from_opponent":
        threshold = float(params.get("distance", cfg.retreat_distance))
        if view.distance > threshold:
            progress["done"] = True
            return IDLE, True
        bearing = _bearing(view)
        return Move(-cfg.walk_speed * math.cos(bearing), -cfg.walk_speed * math.sin(bearing)), False

    if kind == "go_behind_opponent":
        offset = float(params.get("offset", cfg.go_behind_offset))
        tx = view.opponent_pose.x - offset * math.cos(view.opponent_pose.facing)
        ty = view.opponent_pose.y - offset * math.sin(view.opponent_pose.facing)
        if math.dist((view.self_pose.x, view.self_pose.y), (tx, ty)) > cfg.go_behind_tolerance:
            return _toward(view, tx, ty, cfg.walk_speed, dt), False
        err = _wrap(_bearing(view) - view.self_pose.facing)
        if abs(err) > cfg.face_tolerance:
            return _turn_toward(err, cfg), False
        progress["done"] = True
        return IDLE, True

    if kind == "face_opponent":
        tolerance = float(params.get("tolerance", cfg.face_tolerance))
        err = _wrap(_bearing(view) - view.self_pose.facing)
        if abs(err) <= tolerance:
            progress["done"] = True
            return IDLE, True
        return _turn_toward(err, cfg), False

    if kind == "tackle":
        launch = progress.get("launch_tick")
        if launch is None:
            if not _cooldown_ready(view, "tackle"):
                return IDLE, False
            progress["launch_tick"] = view.tick
            return Attack("tackle"), False
        # the dash itself is ballistic in the simulator; one tick of
        # scheduling latency sits between the trigger and its first step
        elapsed = view.tick - launch
        contact = view.distance < 2 * cfg.agent_radius
        if elapsed >= round(cfg.tackle_duration / dt) + 1 or contact:
            progress["done"] = True
            return IDLE, True
        return IDLE, False

    # thunderbolt / iron_tail: single execution, satisfied on the launch tick
    if not _cooldown_ready(view, kind):
        return IDLE, False
    progress["done"] = True
    return Attack(kind), True


def eval_condition(kind: str, params: dict, view: PerceptionView,
                   armed_tick: int | None = None) -> bool:
    """Pure predicate over the perception view.  Threshold comparisons are
    strict; elapsed_ticks fires once exactly that many ticks have passed
    since arming."""
    if kind not in _CATALOG.conditions:
        raise UnknownKindError(kind)
    if kind == "distance_below":
        return view.distance < float(params["value"])
    if kind == "distance_above":
        return view.distance > float(params["value"])
    if kind == "self_hp_below":
        return view.self_hp < float(params["value"])
    if kind == "opponent_hp_below":
        return view.opponent_hp < float(params["value"])
    if kind == "opponent_in_front":
        tolerance = float(params.get("tolerance", 0.35))
        return abs(_wrap(_bearing(view) - view.self_pose.facing)) < tolerance
    # elapsed_ticks
    armed = view.tick if armed_tick is None else armed_tick
    return view.tick - armed >= float(params["ticks"])


@dataclass
class ActionRuntime:
    """Binds the catalog to a simulator config; the object a branch's tick
    consumes for stepping actions and evaluating conditions."""

    config: SimConfig = field(default_factory=SimConfig)

    def step_action(self, kind: str, params: dict, progress: dict,
                    view: PerceptionView) -> tuple[AgentIntent, bool]:
        return step_action(kind, params, progress, view, self.config.tick_len, self.config)

    def eval_condition(self, kind: str, params: dict, view: PerceptionView,
                       armed_tick: int | None = None) -> bool:
        return eval_condition(kind, params, view, armed_tick)
