"""Attach translated branch fragments onto a live behavior branch.

Three connection rules, keyed off the fragment's root node:

1. action/repeat root  -- the command preempts: it replaces whatever was
   queued after the cursor and the cursor jumps onto it,
2. condition root      -- appended at the spine tail; issued during an
   active loop it doubles as that loop's ending condition,
3. then root           -- queued without disturbing the cursor: after the
   spine tail, under a tail condition's true branch, or (during a loop)
   after the loop body, where the then node marks the body boundary.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum

from .branch import (
    ActionNode,
    BehaviorBranch,
    BranchError,
    ConditionNode,
    Node,
    NodeId,
    RepeatNode,
    StructureError,
    ThenNode,
    child_ids,
    validate_arborescence,
)


class GraftError(BranchError):
    pass


class EmptyFragmentError(GraftError):
    pass


class DanglingThenError(GraftError):
    """A then root with nothing after it cannot be classified."""


class InvalidFragmentError(GraftError):
    pass


@dataclass(frozen=True)
class BranchFragment:
    """A validated, never-ticked subtree ready to graft (ids are local)."""

    nodes: dict[NodeId, Node]
    root: NodeId


class AfterThen(Enum):
    ACTION_OR_CONTROL = "action_or_control"
    CONDITION = "condition"


@dataclass(frozen=True)
class RootClass:
    kind: str  # preempt | bare_condition | then_prefixed
    after: AfterThen | None = None


PREEMPT = RootClass("preempt")
BARE_CONDITION = RootClass("bare_condition")


class GraftRule(str, Enum):
    PREEMPT_SWITCH = "PreemptSwitch"
    APPEND_AS_NEXT = "AppendAsNext"
    APPEND_AS_TRUE_NODE = "AppendAsTrueNode"
    LOOP_ENDING_CONDITION = "LoopEndingCondition"
    AFTER_REPETITION = "AfterRepetition"


@dataclass(frozen=True)
class GraftReport:
    rule: GraftRule
    attach_point: NodeId | str  # node id, or "root" when the host was empty
    discarded_subtree: tuple[NodeId, ...] = ()
    current_changed: bool = False
    fragment_root: NodeId = -1  # id of the fragment root after the merge


def fragment_from_nodes(nodes: dict[NodeId, Node], root: NodeId) -> BranchFragment:
    frag = BranchFragment(dict(nodes), root)
    problems = validate_fragment(frag)
    if problems:
        raise InvalidFragmentError("; ".join(problems))
    return frag


def validate_fragment(fragment: BranchFragment) -> list[str]:
    probe = BehaviorBranch()
    probe.nodes = dict(fragment.nodes)
    probe.root = fragment.root
    problems = validate_arborescence(probe)
    for nid, node in fragment.nodes.items():
        if isinstance(node, ActionNode) and node.satisfied:
            problems.append(f"fragment action {nid} pre-satisfied")
        if isinstance(node, ConditionNode) and node.fired:
            problems.append(f"fragment condition {nid} pre-fired")
        if isinstance(node, RepeatNode) and node.remaining is not None:
            problems.append(f"fragment repeat {nid} pre-entered")
    return problems


def classify_root(fragment: BranchFragment) -> RootClass:
    if not fragment.nodes or fragment.root not in fragment.nodes:
        raise EmptyFragmentError("fragment has no root node")
    root = fragment.nodes[fragment.root]
    if isinstance(root, (ActionNode, RepeatNode)):
        return PREEMPT
    if isinstance(root, ConditionNode):
        return BARE_CONDITION
    assert isinstance(root, ThenNode)
    if root.next is None:
        raise DanglingThenError("then root with no node after it")
    follower = fragment.nodes[root.next]
    after = AfterThen.CONDITION if isinstance(follower, ConditionNode) else AfterThen.ACTION_OR_CONTROL
    return RootClass("then_prefixed", after)


def spine_tail(branch: BehaviorBranch) -> NodeId | None:
    """Last node following ``next`` links from the root (true branches are
    never descended into: the spine is the agent's main queued plan)."""
    if branch.root is None:
        return None
    nid = branch.root
    seen = {nid}
    while True:
        nxt = branch.nodes[nid].next
        if nxt is None:
            return nid
        if nxt in seen:
            raise StructureError(f"spine cycle at {nxt}")
        seen.add(nxt)
        nid = nxt


def _true_branch_tail(branch: BehaviorBranch, start: NodeId) -> NodeId:
    nid = start
    while branch.nodes[nid].next is not None:
        nid = branch.nodes[nid].next
    return nid


def is_repeating(branch: BehaviorBranch) -> bool:
    """Whether an active repeat scope encloses the cursor."""
    return bool(branch.active_repeat_scopes())


def subtree_ids(branch: BehaviorBranch, start: NodeId) -> list[NodeId]:
    out: list[NodeId] = []
    stack = [start]
    while stack:
        nid = stack.pop()
        out.append(nid)
        stack.extend(child_ids(branch.nodes[nid]))
    return out


def _merge(branch: BehaviorBranch, fragment: BranchFragment) -> NodeId:
    """Copy fragment nodes into the branch under fresh ids; returns the new
    root id.  Fragment ids are local, so they never leak into the host."""
    mapping: dict[NodeId, NodeId] = {}
    for old in fragment.nodes:
        mapping[old] = branch.allocate_id()
    for old, node in fragment.nodes.items():
        clone = copy.deepcopy(node)
        if clone.next is not None:
            clone.next = mapping[clone.next]
        if isinstance(clone, ConditionNode) and clone.true_node is not None:
            clone.true_node = mapping[clone.true_node]
        branch.nodes[mapping[old]] = clone
    return mapping[fragment.root]


def graft(branch: BehaviorBranch, fragment: BranchFragment) -> GraftReport:
    problems = validate_fragment(fragment)
    if problems:
        raise InvalidFragmentError("; ".join(problems))
    root_class = classify_root(fragment)

    if branch.root is None:
        # Bootstrap: the fragment becomes the whole branch.  Any class needs
        # the cursor placed at the new root, so current_changed is honest.
        new_root = _merge(branch, fragment)
        branch.root = new_root
        branch.current = new_root
        node = branch.nodes[new_root]
        if isinstance(node, RepeatNode):
            node.remaining = node.count  # cursor enters it now
        rule = GraftRule.PREEMPT_SWITCH if root_class.kind == "preempt" else GraftRule.APPEND_AS_NEXT
        return GraftReport(rule, "root", (), True, new_root)

    if root_class.kind == "preempt":
        cur = branch.current
        assert cur is not None
        old_next = branch.nodes[cur].next
        discarded: tuple[NodeId, ...] = ()
        if old_next is not None:
            doomed = subtree_ids(branch, old_next)
            # drop loop-ender registrations that point into the discard
            gone = set(doomed)
            for rid in list(branch.ending_conditions):
                if rid in gone:
                    del branch.ending_conditions[rid]
                else:
                    branch.ending_conditions[rid] = [
                        c for c in branch.ending_conditions[rid] if c not in gone
                    ]
            for nid in doomed:
                del branch.nodes[nid]
            discarded = tuple(sorted(doomed))
        new_root = _merge(branch, fragment)
        branch.nodes[cur].next = new_root
        node = branch.nodes[new_root]
        if isinstance(node, RepeatNode):
            node.remaining = node.count  # cursor enters it now
        branch.current = new_root
        return GraftReport(GraftRule.PREEMPT_SWITCH, cur, discarded, True, new_root)

    tail = spine_tail(branch)
    assert tail is not None
    repeating = is_repeating(branch)

    if root_class.kind == "bare_condition":
        new_root = _merge(branch, fragment)
        branch.nodes[tail].next = new_root
        if repeating:
            scope = branch.active_repeat_scopes()[0]
            branch.ending_conditions.setdefault(scope, []).append(new_root)
            return GraftReport(GraftRule.LOOP_ENDING_CONDITION, tail, (), False, new_root)
        return GraftReport(GraftRule.APPEND_AS_NEXT, tail, (), False, new_root)

    # then-prefixed
    new_root = _merge(branch, fragment)
    if repeating:
        # The then node bounds the loop body, so everything after it runs
        # only once repetition finishes.
        branch.nodes[tail].next = new_root
        return GraftReport(GraftRule.AFTER_REPETITION, tail, (), False, new_root)
    tail_node = branch.nodes[tail]
    if isinstance(tail_node, ConditionNode):
        if tail_node.true_node is None:
            tail_node.true_node = new_root
            return GraftReport(GraftRule.APPEND_AS_TRUE_NODE, tail, (), False, new_root)
        true_tail = _true_branch_tail(branch, tail_node.true_node)
        branch.nodes[true_tail].next = new_root
        return GraftReport(GraftRule.APPEND_AS_TRUE_NODE, true_tail, (), False, new_root)
    branch.nodes[tail].next = new_root
    return GraftReport(GraftRule.APPEND_AS_NEXT, tail, (), False, new_root)
