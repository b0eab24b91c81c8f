"""Real-time grafting of text-commanded behavior branches onto game agents
in a deterministic 2D duel arena."""

from .branch import (
    ActionNode,
    AgentIntent,
    Attack,
    BehaviorBranch,
    ConditionNode,
    IDLE,
    Idle,
    Move,
    PerceptionView,
    Pose,
    RepeatNode,
    Rotate,
    ThenNode,
    TickOutcome,
    UNBOUNDED,
    new_branch,
    validate_arborescence,
)
from .graft import BranchFragment, GraftReport, GraftRule, classify_root, graft, is_repeating, spine_tail
from .script import Script, ScriptError, compile_script, parse, serialize, validate
from .actions import ActionRuntime, catalog, catalog_document
from .arena import SimConfig, WorldState, init, perception_for, snapshot, step

__all__ = [name for name in dir() if not name.startswith("_")]
