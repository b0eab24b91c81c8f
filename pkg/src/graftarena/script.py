"""Branch scripts: the textual contract between translators and the graft
engine.

A script document is a JSON array of node objects:

    {"node":"action","kind":K,"params":{...}?}
    {"node":"condition","kind":K,"params":{...}?,"true":[...]}
    {"node":"repeat","count":N or "forever"}
    {"node":"then"}

Canonical serialization keeps the keys in that order, sorts params keys,
and uses no insignificant whitespace, so structurally equal scripts are
byte-identical.  Anything a language model might emit gets validated here
before it can touch a live agent: unknown kinds, unknown or missing
params, bad counts and over-deep nesting are all rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

from .branch import (
    ActionNode,
    ConditionNode,
    Node,
    NodeId,
    RepeatNode,
    ThenNode,
    UNBOUNDED,
)
from .graft import BranchFragment, fragment_from_nodes

MAX_DEPTH = 16

ParamValue = Union[int, float, str]


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    location: str  # JSON-path-ish, e.g. "[2].true[0].kind"
    message: str

    def __str__(self) -> str:
        return f"{self.severity} at {self.location}: {self.message}"


class ScriptError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics) or "invalid script")


@dataclass(frozen=True)
class ActionSpec:
    kind: str
    params: dict[str, ParamValue] = field(default_factory=dict)


@dataclass(frozen=True)
class ConditionSpec:
    kind: str
    params: dict[str, ParamValue] = field(default_factory=dict)
    true_branch: tuple["ScriptNode", ...] = ()


@dataclass(frozen=True)
class RepeatSpec:
    count: float  # int >= 1, or UNBOUNDED


@dataclass(frozen=True)
class ThenSpec:
    pass


ScriptNode = Union[ActionSpec, ConditionSpec, RepeatSpec, ThenSpec]


@dataclass(frozen=True)
class Script:
    sequence: tuple[ScriptNode, ...]


# --------------------------------------------------------------------------
# Parsing.

def _parse_params(raw, loc: str, out: list[Diagnostic]) -> dict[str, ParamValue]:
    if not isinstance(raw, dict):
        out.append(Diagnostic("error", loc, "params must be an object"))
        return {}
    params: dict[str, ParamValue] = {}
    for key, value in raw.items():
        if not isinstance(value, (int, float, str)) or isinstance(value, bool):
            out.append(Diagnostic("error", f"{loc}.{key}", "param values must be numbers or strings"))
            continue
        params[key] = value
    return params


def _parse_node(raw, loc: str, depth: int, out: list[Diagnostic]) -> ScriptNode | None:
    if not isinstance(raw, dict):
        out.append(Diagnostic("error", loc, "node must be an object"))
        return None
    tag = raw.get("node")
    if tag == "action":
        allowed = {"node", "kind", "params"}
        for key in raw:
            if key not in allowed:
                out.append(Diagnostic("error", f"{loc}.{key}", "unknown field"))
        kind = raw.get("kind")
        if not isinstance(kind, str) or not kind:
            out.append(Diagnostic("error", f"{loc}.kind", "action requires a string kind"))
            return None
        params = _parse_params(raw.get("params", {}), f"{loc}.params", out)
        return ActionSpec(kind, params)
    if tag == "condition":
        allowed = {"node", "kind", "params", "true"}
        for key in raw:
            if key not in allowed:
                out.append(Diagnostic("error", f"{loc}.{key}", "unknown field"))
        kind = raw.get("kind")
        if not isinstance(kind, str) or not kind:
            out.append(Diagnostic("error", f"{loc}.kind", "condition requires a string kind"))
            return None
        params = _parse_params(raw.get("params", {}), f"{loc}.params", out)
        if "true" not in raw:
            out.append(Diagnostic("error", f"{loc}.true", "condition requires a true branch (may be [])"))
            return None
        true_raw = raw["true"]
        if not isinstance(true_raw, list):
            out.append(Diagnostic("error", f"{loc}.true", "true branch must be an array"))
            return None
        if depth + 1 > MAX_DEPTH:
            out.append(Diagnostic("error", f"{loc}.true", f"nesting depth exceeds {MAX_DEPTH}"))
            return None
        branch = _parse_sequence(true_raw, f"{loc}.true", depth + 1, out)
        return ConditionSpec(kind, params, branch)
    if tag == "repeat":
        allowed = {"node", "count"}
        for key in raw:
            if key not in allowed:
                out.append(Diagnostic("error", f"{loc}.{key}", "unknown field"))
        count = raw.get("count")
        if count == "forever":
            return RepeatSpec(UNBOUNDED)
        if isinstance(count, int) and not isinstance(count, bool) and count >= 1:
            return RepeatSpec(count)
        out.append(Diagnostic("error", f"{loc}.count", 'count must be an integer >= 1 or "forever"'))
        return None
    if tag == "then":
        for key in raw:
            if key != "node":
                out.append(Diagnostic("error", f"{loc}.{key}", "unknown field"))
        return ThenSpec()
    out.append(Diagnostic("error", f"{loc}.node", f"unknown node tag {tag!r}"))
    return None


def _parse_sequence(raw: list, loc: str, depth: int, out: list[Diagnostic]) -> tuple[ScriptNode, ...]:
    nodes = []
    for i, item in enumerate(raw):
        node = _parse_node(item, f"{loc}[{i}]", depth, out)
        if node is not None:
            nodes.append(node)
    return tuple(nodes)


def parse(text: str | bytes) -> Script:
    """Parse a script document.  Raises ScriptError on any malformed input;
    never lets arbitrary bytes escalate past a diagnostic."""
    diagnostics: list[Diagnostic] = []
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScriptError([Diagnostic("error", "$", f"not UTF-8: {exc}")]) from None
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise ScriptError([Diagnostic("error", "$", f"not valid JSON: {exc}")]) from None
    if not isinstance(doc, list):
        raise ScriptError([Diagnostic("error", "$", "top level must be an array")])
    if not doc:
        raise ScriptError([Diagnostic("error", "$", "script is empty")])
    sequence = _parse_sequence(doc, "$", 1, diagnostics)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise ScriptError(errors)
    return Script(sequence)


# --------------------------------------------------------------------------
# Serialization (canonical).

def _node_to_obj(node: ScriptNode) -> dict:
    if isinstance(node, ActionSpec):
        obj: dict = {"node": "action", "kind": node.kind}
        if node.params:
            obj["params"] = {k: node.params[k] for k in sorted(node.params)}
        return obj
    if isinstance(node, ConditionSpec):
        obj = {"node": "condition", "kind": node.kind}
        if node.params:
            obj["params"] = {k: node.params[k] for k in sorted(node.params)}
        obj["true"] = [_node_to_obj(n) for n in node.true_branch]
        return obj
    if isinstance(node, RepeatSpec):
        count = "forever" if node.count == UNBOUNDED else int(node.count)
        return {"node": "repeat", "count": count}
    return {"node": "then"}


def serialize(script: Script) -> str:
    """Canonical text: fixed key order, no whitespace.  parse(serialize(s))
    is structurally s, and equal scripts serialize to identical bytes."""
    return json.dumps([_node_to_obj(n) for n in script.sequence], separators=(",", ":"))


# --------------------------------------------------------------------------
# Semantic validation against a catalog.

def _validate_params(kind: str, params: dict, schema: dict, loc: str, out: list[Diagnostic]) -> None:
    for name, value in params.items():
        if name not in schema:
            out.append(Diagnostic("error", f"{loc}.params.{name}", f"unknown param for {kind}"))
            continue
        spec = schema[name]
        if spec.type == "number" and not isinstance(value, (int, float)):
            out.append(Diagnostic("error", f"{loc}.params.{name}", "expected a number"))
        if spec.type == "string":
            if not isinstance(value, str):
                out.append(Diagnostic("error", f"{loc}.params.{name}", "expected a string"))
            elif spec.choices and value not in spec.choices:
                out.append(Diagnostic("error", f"{loc}.params.{name}",
                                      f"must be one of {sorted(spec.choices)}"))
    for name, spec in schema.items():
        if spec.required and name not in params:
            out.append(Diagnostic("error", f"{loc}.params.{name}", f"{kind} requires param {name}"))


def validate(script: Script, catalog) -> list[Diagnostic]:
    """All catalog/arity/depth/structure diagnostics, without stopping at
    the first.  Errors block compilation; warnings do not."""
    out: list[Diagnostic] = []
    if not script.sequence:
        out.append(Diagnostic("error", "$", "script is empty"))
    elif isinstance(script.sequence[0], ThenSpec) and len(script.sequence) == 1:
        out.append(Diagnostic("error", "$[0]", "a leading then needs a following node"))

    def walk(nodes: tuple[ScriptNode, ...], loc: str, depth: int) -> None:
        if depth > MAX_DEPTH:
            out.append(Diagnostic("error", loc, f"nesting depth exceeds {MAX_DEPTH}"))
            return
        for i, node in enumerate(nodes):
            here = f"{loc}[{i}]"
            if isinstance(node, ActionSpec):
                desc = catalog.actions.get(node.kind)
                if desc is None:
                    out.append(Diagnostic("error", f"{here}.kind", f"unknown action kind {node.kind!r}"))
                else:
                    _validate_params(node.kind, node.params, desc.params, here, out)
            elif isinstance(node, ConditionSpec):
                desc = catalog.conditions.get(node.kind)
                if desc is None:
                    out.append(Diagnostic("error", f"{here}.kind", f"unknown condition kind {node.kind!r}"))
                else:
                    _validate_params(node.kind, node.params, desc.params, here, out)
                if not node.true_branch:
                    out.append(Diagnostic("warning", f"{here}.true", "condition has an empty true branch"))
                walk(node.true_branch, f"{here}.true", depth + 1)
            elif isinstance(node, RepeatSpec):
                if node.count != UNBOUNDED and (node.count != int(node.count) or node.count < 1):
                    out.append(Diagnostic("error", f"{here}.count", "count must be >= 1 or forever"))

    walk(script.sequence, "$", 1)
    return out


# --------------------------------------------------------------------------
# Compilation to a graftable fragment.

def compile_script(script: Script, catalog) -> BranchFragment:
    """Compile a validated script into a branch fragment: the sequence
    becomes a next-chain, true branches become true-node subtrees."""
    diagnostics = validate(script, catalog)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise ScriptError(errors)

    nodes: dict[NodeId, Node] = {}
    counter = 0

    def fresh() -> NodeId:
        nonlocal counter
        counter += 1
        return counter

    def build_chain(specs: tuple[ScriptNode, ...]) -> NodeId | None:
        head: NodeId | None = None
        prev: NodeId | None = None
        for spec in specs:
            nid = fresh()
            if isinstance(spec, ActionSpec):
                nodes[nid] = ActionNode(spec.kind, dict(spec.params))
            elif isinstance(spec, ConditionSpec):
                true_head = build_chain(spec.true_branch)
                nodes[nid] = ConditionNode(spec.kind, dict(spec.params), true_node=true_head)
            elif isinstance(spec, RepeatSpec):
                nodes[nid] = RepeatNode(spec.count)
            else:
                nodes[nid] = ThenNode()
            if head is None:
                head = nid
            if prev is not None:
                nodes[prev].next = nid
            prev = nid
        return head

    root = build_chain(script.sequence)
    assert root is not None
    return fragment_from_nodes(nodes, root)
