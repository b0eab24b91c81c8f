"""Behavior branch: a rooted arborescence of single-use nodes with a traversal cursor.

Unlike a classic behavior tree, a branch is not looped over the agent's
lifetime.  Nodes are consumed as the cursor (``current``) flows through
them; new fragments are grafted on at runtime (see ``graft``).  Three
traversal rules drive the cursor each tick:

* sequence  -- advance along ``next`` links, pausing before action nodes
  until the active action reports satisfied,
* selection -- armed condition nodes between the cursor and the active
  action are polled every tick; the first true one redirects the cursor,
* repetition -- a repeat node re-runs the nodes after it, resetting their
  flags, until its remaining count is spent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Union

UNBOUNDED = math.inf

NodeId = int


class BranchError(Exception):
    """Base class for behavior-branch errors."""


class StructureError(BranchError):
    """The branch violates its arborescence invariants (internal bug)."""


class WrongNodeTypeError(BranchError):
    """An operation was pointed at a node of the wrong variant."""


# --------------------------------------------------------------------------
# Intents: the per-tick motor/attack output handed to the simulator.

@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class Move:
    vx: float
    vy: float


@dataclass(frozen=True)
class Rotate:
    angular: float


@dataclass(frozen=True)
class Attack:
    kind: str  # tackle | thunderbolt | iron_tail


AgentIntent = Union[Idle, Move, Rotate, Attack]

IDLE = Idle()


# --------------------------------------------------------------------------
# Perception: the read-only world view condition predicates and action
# steppers consume.

@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    facing: float


@dataclass(frozen=True)
class PerceptionView:
    self_pose: Pose
    opponent_pose: Pose
    self_hp: int
    opponent_hp: int
    distance: float
    tick: int
    projectiles: tuple[tuple[float, float], ...] = ()
    # Remaining cooldown ticks per attack kind.  Attack steppers need this
    # to pace launches; absence of a key means ready.
    self_cooldowns: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        want = math.dist(
            (self.self_pose.x, self.self_pose.y),
            (self.opponent_pose.x, self.opponent_pose.y),
        )
        if not math.isclose(self.distance, want, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(
                f"distance {self.distance} inconsistent with poses (want {want})"
            )


# --------------------------------------------------------------------------
# Nodes.

@dataclass
class ActionNode:
    kind: str
    params: dict = field(default_factory=dict)
    satisfied: bool = False
    next: NodeId | None = None
    # Per-activation scratch owned by the action stepper; cleared on
    # repetition re-entry.  Never serialized.
    progress: dict = field(default_factory=dict)


@dataclass
class ConditionNode:
    kind: str
    params: dict = field(default_factory=dict)
    fired: bool = False
    next: NodeId | None = None
    true_node: NodeId | None = None
    # Tick at which the condition was first evaluated; feeds elapsed-tick
    # predicates.  Cleared on repetition re-entry.
    armed_tick: int | None = None


@dataclass
class RepeatNode:
    count: float  # positive int, or UNBOUNDED
    remaining: float | None = None  # None until first traversal entry
    next: NodeId | None = None


@dataclass
class ThenNode:
    next: NodeId | None = None


Node = Union[ActionNode, ConditionNode, RepeatNode, ThenNode]


def child_ids(node: Node) -> Iterator[NodeId]:
    if node.next is not None:
        yield node.next
    if isinstance(node, ConditionNode) and node.true_node is not None:
        yield node.true_node


# --------------------------------------------------------------------------
# Tick outcome.

@dataclass(frozen=True)
class TickEvent:
    name: str  # condition-fired | node-entered | repeat-iteration |
    #            action-satisfied | branch-exhausted
    node: NodeId | None = None


@dataclass(frozen=True)
class TickOutcome:
    intent: AgentIntent
    events: tuple[TickEvent, ...]


class BehaviorBranch:
    """Mutable behavior branch.  Single-threaded: tick and graft must run
    on the simulation loop's thread; hand-off between threads is fine."""

    def __init__(self) -> None:
        self.nodes: dict[NodeId, Node] = {}
        self.root: NodeId | None = None
        self.current: NodeId | None = None
        # repeat node id -> condition node ids registered as loop enders
        self.ending_conditions: dict[NodeId, list[NodeId]] = {}
        self._next_id: NodeId = 0

    # -- construction -----------------------------------------------------

    def allocate_id(self) -> NodeId:
        nid = self._next_id
        self._next_id += 1
        return nid

    def add_node(self, node: Node) -> NodeId:
        nid = self.allocate_id()
        self.nodes[nid] = node
        return nid

    # -- structure queries ------------------------------------------------

    def parent_map(self) -> dict[NodeId, NodeId]:
        parents: dict[NodeId, NodeId] = {}
        for nid, node in self.nodes.items():
            for child in child_ids(node):
                parents[child] = nid
        return parents

    def path_to_root(self, start: NodeId,
                     parents: dict[NodeId, NodeId] | None = None) -> list[NodeId]:
        """Node ids from ``start`` up to the root, start first.

        Links never change while a tick runs, so tick builds the parent
        map once and threads it through every walk."""
        if parents is None:
            parents = self.parent_map()
        path = [start]
        seen = {start}
        nid = start
        while nid in parents:
            nid = parents[nid]
            if nid in seen:
                raise StructureError(f"cycle through node {nid}")
            seen.add(nid)
            path.append(nid)
        if path[-1] != self.root:
            raise StructureError(f"node {start} not reachable from root")
        return path

    def active_action(self, parents: dict[NodeId, NodeId] | None = None) -> NodeId | None:
        """Nearest action node walking backwards from ``current``."""
        if self.current is None:
            return None
        for nid in self.path_to_root(self.current, parents):
            if isinstance(self.nodes[nid], ActionNode):
                return nid
        return None

    def armed_conditions(self, parents: dict[NodeId, NodeId] | None = None) -> list[NodeId]:
        """Non-fired conditions between ``current`` (inclusive) and the
        active action (exclusive), nearest to current first."""
        if self.current is None:
            return []
        armed: list[NodeId] = []
        for nid in self.path_to_root(self.current, parents):
            node = self.nodes[nid]
            if isinstance(node, ActionNode):
                break
            if isinstance(node, ConditionNode) and not node.fired:
                armed.append(nid)
        return armed

    def active_repeat_scopes(self, parents: dict[NodeId, NodeId] | None = None) -> list[NodeId]:
        """Repeat nodes enclosing ``current`` with passes left, nearest
        first.  Exhausted and never-entered repeats are passed over."""
        if self.current is None:
            return []
        scopes = []
        for nid in self.path_to_root(self.current, parents):
            node = self.nodes[nid]
            if isinstance(node, RepeatNode) and node.remaining is not None and node.remaining > 0:
                scopes.append(nid)
        return scopes

    # -- flag reset -------------------------------------------------------

    def reset_scope(self, repeat_id: NodeId) -> None:
        """Reset satisfied/fired flags in the body of a repeat node.

        The body is everything after the repeat node, bounded by a leaf or
        a then node (then nodes mark where a loop body ends)."""
        node = self.nodes.get(repeat_id)
        if not isinstance(node, RepeatNode):
            raise WrongNodeTypeError(f"node {repeat_id} is not a repeat node")
        if node.next is not None:
            self._reset_subtree(node.next)

    def registered_enders(self) -> set[NodeId]:
        return {cid for conds in self.ending_conditions.values() for cid in conds}

    def _reset_subtree(self, nid: NodeId) -> None:
        node = self.nodes[nid]
        if isinstance(node, ThenNode):
            return  # body boundary
        if isinstance(node, ActionNode):
            node.satisfied = False
            node.progress = {}
        elif isinstance(node, ConditionNode):
            # Loop-ending conditions monitor across passes: their arming
            # and firing state survives body resets.
            if nid not in self.registered_enders():
                node.fired = False
                node.armed_tick = None
                if node.true_node is not None:
                    self._reset_subtree(node.true_node)
        elif isinstance(node, RepeatNode):
            node.remaining = None  # re-initialized on re-entry
        if node.next is not None:
            self._reset_subtree(node.next)

    # -- traversal --------------------------------------------------------

    def _enter(self, nid: NodeId, events: list[TickEvent]) -> None:
        self.current = nid
        node = self.nodes[nid]
        if isinstance(node, RepeatNode):
            node.remaining = node.count
        events.append(TickEvent("node-entered", nid))

    def _gate_open(self, parents: dict[NodeId, NodeId] | None = None) -> bool:
        """Whether sequence flow may advance onto an action node."""
        active = self.active_action(parents)
        if active is None:
            return True
        return self.nodes[active].satisfied  # type: ignore[union-attr]

    def _try_fire(self, cid: NodeId, view: PerceptionView, runtime,
                  events: list[TickEvent]) -> bool:
        cond = self.nodes[cid]
        assert isinstance(cond, ConditionNode)
        if cond.armed_tick is None:
            cond.armed_tick = view.tick
        if not runtime.eval_condition(cond.kind, cond.params, view, cond.armed_tick):
            return False
        cond.fired = True
        events.append(TickEvent("condition-fired", cid))
        # A firing loop ender kills its loop no matter which route
        # evaluated it (it may sit on the armed path inside the body).
        for rid, conds in self.ending_conditions.items():
            if cid in conds:
                repeat = self.nodes.get(rid)
                if isinstance(repeat, RepeatNode):
                    repeat.remaining = 0
        self._enter(cond.true_node if cond.true_node is not None else cid, events)
        return True

    def _selection(self, view: PerceptionView, runtime,
                   events: list[TickEvent], parents) -> bool:
        """Poll armed conditions (nearest-first), then loop-ending
        conditions of active scopes.  Returns True if one fired."""
        for cid in self.armed_conditions(parents):
            if self._try_fire(cid, view, runtime, events):
                return True
        for rid in self.active_repeat_scopes(parents):
            for cid in self.ending_conditions.get(rid, []):
                cond = self.nodes.get(cid)
                if not isinstance(cond, ConditionNode) or cond.fired:
                    continue
                if self._try_fire(cid, view, runtime, events):
                    return True
        return False

    def _sequence(self, events: list[TickEvent], parents) -> None:
        # Advancement within one tick is bounded by node count to keep a
        # pathological chain of control nodes from livelocking the loop.
        budget = len(self.nodes)
        while budget > 0 and self.current is not None:
            budget -= 1
            node = self.nodes[self.current]
            at_boundary = node.next is None or isinstance(node, ThenNode)
            if at_boundary:
                scopes = self.active_repeat_scopes(parents)
                if scopes:
                    if not self._gate_open(parents):
                        return  # body action still running; loop-back pends
                    rid = scopes[0]
                    repeat = self.nodes[rid]
                    assert isinstance(repeat, RepeatNode)
                    if repeat.next is None:
                        repeat.remaining = 0  # empty body: nothing to re-run
                        continue
                    if repeat.remaining != UNBOUNDED:
                        repeat.remaining -= 1  # this pass is complete
                    if repeat.remaining > 0:
                        self.reset_scope(rid)
                        self._enter(repeat.next, events)
                        events.append(TickEvent("repeat-iteration", rid))
                        continue
                    continue  # scope just exhausted; re-check boundary
                if node.next is None:
                    if self._gate_open(parents):
                        events.append(TickEvent("branch-exhausted", self.current))
                    return
                # then node outside any live loop: plain pass-through
                if not self._gate_open(parents) and isinstance(self.nodes[node.next], ActionNode):
                    return
                self._enter(node.next, events)
                continue
            if isinstance(self.nodes[node.next], ActionNode):
                if not self._gate_open(parents):
                    return
                self._enter(node.next, events)
                continue
            self._enter(node.next, events)

    def tick(self, view: PerceptionView, runtime) -> TickOutcome:
        """Run one frame of traversal and return the agent's intent.

        ``runtime`` supplies the condition predicates and action steppers
        (see ``actions.ActionRuntime``); the branch itself stays agnostic
        of what the catalog kinds mean.
        """
        events: list[TickEvent] = []
        if self.root is None:
            return TickOutcome(IDLE, ())
        if self.current is not None and self.current not in self.nodes:
            raise StructureError(f"current node {self.current} missing from branch")
        parents = self.parent_map()
        fired = self._selection(view, runtime, events, parents)
        if not fired:
            self._sequence(events, parents)
        intent: AgentIntent = IDLE
        active = self.active_action(parents)
        if active is not None:
            node = self.nodes[active]
            assert isinstance(node, ActionNode)
            if not node.satisfied:
                intent, satisfied = runtime.step_action(
                    node.kind, node.params, node.progress, view
                )
                if satisfied:
                    node.satisfied = True
                    events.append(TickEvent("action-satisfied", active))
        return TickOutcome(intent, tuple(events))


def new_branch() -> BehaviorBranch:
    return BehaviorBranch()


# --------------------------------------------------------------------------
# Validation and structural comparison.

def validate_arborescence(branch: BehaviorBranch) -> list[str]:
    """Check the rooted-arborescence invariants; returns human-readable
    problems (empty list when sound)."""
    problems: list[str] = []
    if branch.root is None:
        if branch.nodes:
            problems.append("nodes present but no root")
        if branch.current is not None:
            problems.append("current set on an empty branch")
        return problems
    if branch.root not in branch.nodes:
        return [f"root {branch.root} missing from node map"]

    slots: dict[NodeId, int] = {nid: 0 for nid in branch.nodes}
    for nid, node in branch.nodes.items():
        for child in child_ids(node):
            if child not in branch.nodes:
                problems.append(f"node {nid} links to missing node {child}")
                continue
            slots[child] += 1
    for nid, count in slots.items():
        if nid == branch.root:
            if count != 0:
                problems.append(f"root {nid} has {count} parent slots")
        elif count != 1:
            problems.append(f"node {nid} has {count} parent slots (want 1)")

    # reachability + acyclicity from root
    seen: set[NodeId] = set()
    stack = [branch.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            problems.append(f"cycle reaches node {nid}")
            continue
        seen.add(nid)
        stack.extend(c for c in child_ids(branch.nodes[nid]) if c in branch.nodes)
    unreachable = set(branch.nodes) - seen
    if unreachable:
        problems.append(f"unreachable nodes: {sorted(unreachable)}")

    if branch.current is not None and branch.current not in seen:
        problems.append(f"current {branch.current} not reachable from root")

    for nid, node in branch.nodes.items():
        if isinstance(node, RepeatNode):
            if not (node.count == UNBOUNDED or (node.count == int(node.count) and node.count >= 1)):
                problems.append(f"repeat {nid} has bad count {node.count}")
            if node.remaining is not None and node.remaining > node.count:
                problems.append(f"repeat {nid} remaining {node.remaining} > count {node.count}")
    for rid in branch.ending_conditions:
        if rid not in branch.nodes or not isinstance(branch.nodes.get(rid), RepeatNode):
            problems.append(f"ending-condition registry keys non-repeat node {rid}")
    return problems


def structure_signature(branch_or_nodes, root: NodeId | None = None):
    """Canonical nested form of a branch (or fragment) up to id renaming.

    Flags are excluded: two branches with the same shape, kinds and params
    compare equal regardless of traversal state.
    """
    if root is None and hasattr(branch_or_nodes, "root"):
        nodes = branch_or_nodes.nodes
        root = branch_or_nodes.root
    else:
        nodes = branch_or_nodes
    if root is None:
        return None

    def enc(nid: NodeId | None):
        if nid is None:
            return None
        node = nodes[nid]
        if isinstance(node, ActionNode):
            return ("action", node.kind, tuple(sorted(node.params.items())), enc(node.next))
        if isinstance(node, ConditionNode):
            return ("condition", node.kind, tuple(sorted(node.params.items())),
                    enc(node.next), enc(node.true_node))
        if isinstance(node, RepeatNode):
            return ("repeat", node.count, enc(node.next))
        return ("then", enc(node.next))

    return enc(root)
