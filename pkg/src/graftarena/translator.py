"""Free-form command text to branch script.

Two routes: a deterministic pattern translator (the test-time default)
and a pluggable HTTP completion endpoint with few-shot prompting.  Both
feed strict validation, so no invalid script ever reaches a live agent;
the endpoint route gets one self-repair retry with the diagnostics
appended before failing closed.
"""
from __future__ import annotations

import json
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from importlib import resources

from .actions import catalog
from .branch import UNBOUNDED
from .script import (
    ActionSpec,
    ConditionSpec,
    RepeatSpec,
    Script,
    ScriptError,
    ScriptNode,
    ThenSpec,
    parse,
    validate,
)


class TranslationError(Exception):
    pass


class NoTranslationError(TranslationError):
    """No rule matched and no fallback was available."""


@dataclass(frozen=True)
class TranslationResult:
    script: Script
    source: str  # rule_based | llm
    latency_ms: float
    raw: str | None = None


def _load_data(name: str) -> str:
    return resources.files("graftarena.data").joinpath(name).read_text("utf-8")


def load_synonyms() -> dict[str, str]:
    return json.loads(_load_data("synonyms.json"))


_SYNONYMS = load_synonyms()

_PUNCT = re.compile(r"[.,!?;:\"()\[\]{}/\\-]+")


def normalize(text: str, synonyms: dict[str, str] | None = None) -> list[str]:
    """Lowercase, strip punctuation, tokenize, apply the synonym table."""
    table = _SYNONYMS if synonyms is None else synonyms
    text = text.lower().replace("'", "")
    text = _PUNCT.sub(" ", text)
    return [table.get(tok, tok) for tok in text.split()]


_NUMBER_WORDS = {
    "once": 1, "twice": 2, "thrice": 3,
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}


def _number(token: str) -> int:
    if token in _NUMBER_WORDS:
        return _NUMBER_WORDS[token]
    return int(token)


# --------------------------------------------------------------------------
# Condition sub-grammar: each pattern must match at the start of the
# remaining phrase; the longest match wins.

_CONDITION_PATTERNS: list[tuple[re.Pattern, object]] = [
    (re.compile(r"^(?:the )?opponents? hp (?:is )?(?:below|under|less than) (?P<n>\d+)"),
     lambda m: ("opponent_hp_below", {"value": int(m.group("n"))})),
    (re.compile(r"^(?:my|self|our)? ?hp (?:is )?(?:below|under|less than) (?P<n>\d+)"),
     lambda m: ("self_hp_below", {"value": int(m.group("n"))})),
    (re.compile(r"^(?:the )?distance (?:is )?(?:below|under|less than) (?P<n>\d+(?:\.\d+)?)"),
     lambda m: ("distance_below", {"value": float(m.group("n"))})),
    (re.compile(r"^(?:the )?distance (?:is )?(?:above|over|greater than|more than) (?P<n>\d+(?:\.\d+)?)"),
     lambda m: ("distance_above", {"value": float(m.group("n"))})),
    (re.compile(r"^(?:the )?opponent (?:is |gets |comes )?(?:close|near)(?:by)?"),
     lambda m: ("distance_below", {"value": 2.0})),
    (re.compile(r"^(?:the )?opponent (?:is )?in front(?: of (?:me|you|us))?"),
     lambda m: ("opponent_in_front", {})),
    (re.compile(r"^(?:after )?(?P<n>\d+) ticks?(?: (?:have )?(?:passed|elapsed))?"),
     lambda m: ("elapsed_ticks", {"ticks": int(m.group("n"))})),
]


def _match_condition(phrase: str):
    """Returns ((kind, params), remainder) for the longest condition
    pattern anchored at the start, or None."""
    best = None
    for pattern, build in _CONDITION_PATTERNS:
        m = pattern.match(phrase)
        if m and (best is None or m.end() > best[0].end()):
            best = (m, build)
    if best is None:
        return None
    m, build = best
    remainder = phrase[m.end():].strip()
    if remainder.startswith("then "):
        remainder = remainder[5:]
    elif remainder == "then":
        remainder = ""
    return build(m), remainder


# --------------------------------------------------------------------------
# Phrase rules.  Applied by priority, longest regex match breaking ties.

_ATTACK = r"(?:tackle|thunderbolt|iron[ _]?tail)"

_RULES: list[tuple[int, re.Pattern]] = []
_BUILDERS: dict[int, object] = {}


def _rule(priority: int, pattern: str):
    regex = re.compile(pattern)

    def register(fn):
        idx = len(_RULES)
        _RULES.append((priority, regex))
        _BUILDERS[idx] = fn
        return fn
    return register


def _attack_kind(raw: str) -> str:
    raw = raw.replace(" ", "_")
    return "iron_tail" if raw in ("irontail", "iron_tail") else raw


@_rule(100, r"^(?:and )?(?:then|after that|next)[, ]+(?P<rest>.+)$")
def _build_then(m):
    rest = _translate_phrase(m.group("rest"))
    if rest is None:
        return None
    return [ThenSpec(), *rest]


@_rule(90, r"^(?:keep|continue)(?: doing| to| on)? (?P<rest>.+?)(?: forever)?$")
def _build_keep(m):
    rest = _translate_phrase(m.group("rest"))
    if rest is None:
        return None
    return [RepeatSpec(UNBOUNDED), *rest]


@_rule(90, r"^(?P<rest>.+?) (?:forever|endlessly|nonstop|repeatedly)$")
def _build_forever(m):
    rest = _translate_phrase(m.group("rest"))
    if rest is None:
        return None
    return [RepeatSpec(UNBOUNDED), *rest]


@_rule(85, r"^(?:do |repeat )?(?P<rest>.+?) (?P<n>\d+|one|two|three|four|five|six|seven|eight|nine|ten) (?:times|more times)$")
def _build_n_times(m):
    rest = _translate_phrase(m.group("rest"))
    if rest is None:
        return None
    return [RepeatSpec(_number(m.group("n"))), *rest]


@_rule(85, r"^(?:do |repeat )?(?P<rest>.+?) (?P<n>once|twice|thrice)$")
def _build_adverb_times(m):
    rest = _translate_phrase(m.group("rest"))
    if rest is None:
        return None
    return [RepeatSpec(_number(m.group("n"))), *rest]


@_rule(80, r"^(?:if|when|whenever|once|after) (?P<rest>.+)$")
def _build_conditional(m):
    matched = _match_condition(m.group("rest"))
    if matched is None:
        return None
    (kind, params), remainder = matched
    true_branch: tuple[ScriptNode, ...] = ()
    if remainder:
        built = _translate_phrase(remainder)
        if built is None:
            return None
        true_branch = tuple(built)
    return [ConditionSpec(kind, params, true_branch)]


@_rule(60, r"^(?:do |use |perform |launch |fire )?(?:a |an |the )?(?P<atk>" + _ATTACK + r")(?: (?:at |to |on )?(?:the )?opponent)?( now)?$")
def _build_attack(m):
    return [ActionSpec(_attack_kind(m.group("atk")))]


@_rule(60, r"^(?:escape|retreat|run away|get away|back off|back away|keep away|flee)(?: (?:from|away from) (?:the )?opponent)?$")
def _build_escape(m):
    return [ActionSpec("retreat_from_opponent")]


@_rule(60, r"^(?:go |get |move |walk |sneak |circle )?(?:around )?behind (?:the )?opponent$")
def _build_go_behind(m):
    return [ActionSpec("go_behind_opponent")]


@_rule(55, r"^(?:approach|chase|follow|pursue)(?: (?:the )?opponent)?$|^(?:get|come|move) ?close(?:r)?(?: to (?:the )?opponent)?$|^go to (?:the )?opponent$")
def _build_approach(m):
    return [ActionSpec("approach_opponent")]


@_rule(55, r"^(?:face|look at|watch|aim at|turn to(?:ward)?|turn to face|turn around to)(?: (?:the )?opponent)?$")
def _build_face(m):
    return [ActionSpec("face_opponent")]


@_rule(50, r"^(?:attack|strike|hit|fight)(?: (?:to |at )?(?:the )?opponent)?$")
def _build_generic_attack(m):
    # A static translator cannot pick the range-appropriate attack, so the
    # generic order is face first, then the always-reachable projectile.
    return [ActionSpec("face_opponent"), ActionSpec("thunderbolt")]


@_rule(50, r"^(?:stop|stand still|stay|stay there|stay put|wait|do nothing|idle|rest)$")
def _build_stop(m):
    return [ActionSpec("idle")]


@_rule(40, r"^(?:move|go|walk|step|head) (?P<dir>forward|back(?:ward)?|left|right)$")
def _build_move(m):
    direction = m.group("dir")
    if direction == "back":
        direction = "backward"
    return [ActionSpec("move_direction", {"dir": direction})]


_SPLITS = (" and then ", " then ", " and ", " after that ")


def _translate_phrase(phrase: str) -> list[ScriptNode] | None:
    phrase = phrase.strip()
    if not phrase:
        return None
    candidates = []
    for idx, (priority, regex) in enumerate(_RULES):
        m = regex.match(phrase)
        if m and m.end() == len(phrase):
            candidates.append((priority, m.end(), idx, m))
    for priority, _, idx, m in sorted(candidates, key=lambda c: (-c[0], -c[1])):
        built = _BUILDERS[idx](m)
        if built is not None:
            return built
    for sep in _SPLITS:
        if sep in phrase:
            left, right = phrase.split(sep, 1)
            first = _translate_phrase(left)
            second = _translate_phrase(right)
            if first is not None and second is not None:
                return [*first, *second]
    return None


def translate_rule_based(text: str) -> Script | None:
    """Deterministic pattern translation; None when nothing matches."""
    tokens = normalize(text)
    if not tokens:
        return None
    built = _translate_phrase(" ".join(tokens))
    if built is None:
        return None
    return Script(tuple(built))


# --------------------------------------------------------------------------
# Prompting and the endpoint route.

DEFAULT_EXEMPLARS: tuple[tuple[str, str], ...] = tuple(
    (entry["command"], entry["script"])
    for entry in json.loads(_load_data("exemplars.json"))
)

COMMAND_SLOT = "{command}"
EXEMPLAR_SLOT = "{exemplars}"
CATALOG_SLOT = "{catalog}"


@dataclass(frozen=True)
class PromptTemplate:
    text: str  # must contain the {command} slot; {exemplars}/{catalog} optional
    exemplars: tuple[tuple[str, str], ...] = DEFAULT_EXEMPLARS

    def __post_init__(self) -> None:
        if COMMAND_SLOT not in self.text:
            raise ValueError(f"template lacks the {COMMAND_SLOT} slot")
        cat = catalog()
        for command, script_text in self.exemplars:
            script = parse(script_text)
            problems = [d for d in validate(script, cat) if d.severity == "error"]
            if problems:
                raise ValueError(f"exemplar {command!r} is invalid: {problems[0]}")


def default_template() -> PromptTemplate:
    return PromptTemplate(_load_data("prompt_template.txt"))


def _catalog_block() -> str:
    """Kind listing rendered from the machine-readable catalog export."""
    from .actions import catalog_document

    doc = catalog_document()

    def line(kind: str, spec: dict) -> str:
        params = spec.get("params", {})
        if not params:
            return kind
        parts = []
        for name, p in params.items():
            choices = f" = {'|'.join(p['choices'])}" if p.get("choices") else ""
            parts.append(f"{name}{choices}" + ("" if p["required"] else "?"))
        return f"{kind} (params: {', '.join(parts)})"

    actions = "\n".join(f"  {line(k, v)}" for k, v in doc["actions"].items())
    conditions = "\n".join(f"  {line(k, v)}" for k, v in doc["conditions"].items())
    return f"Action kinds:\n{actions}\n\nCondition kinds:\n{conditions}"


def build_prompt(text: str, template: PromptTemplate | None = None) -> str:
    """Deterministic concatenation: byte-stable for golden-file tests."""
    template = template or default_template()
    exemplar_block = "".join(
        f"Command: {command}\nScript: {script}\n\n"
        for command, script in template.exemplars
    )
    prompt = template.text.replace(CATALOG_SLOT, _catalog_block())
    prompt = prompt.replace(EXEMPLAR_SLOT, exemplar_block)
    return prompt.replace(COMMAND_SLOT, text)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str = "code-model"
    path: str = "/v1/completions"
    api_key_env: str = "GRAFTARENA_API_KEY"
    max_tokens: int = 256
    temperature: float = 0.0
    timeout: float = 10.0


def _default_post(endpoint: EndpointConfig, prompt: str, api_key: str | None) -> str:
    body = json.dumps({
        "model": endpoint.model,
        "prompt": prompt,
        "max_tokens": endpoint.max_tokens,
        "temperature": endpoint.temperature,
    }).encode("utf-8")
    request = urllib.request.Request(
        endpoint.base_url.rstrip("/") + endpoint.path,
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    if api_key:
        request.add_header("Authorization", f"Bearer {api_key}")
    try:
        with urllib.request.urlopen(request, timeout=endpoint.timeout) as response:
            payload = json.loads(response.read().decode("utf-8"))
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise TranslationError(f"endpoint request failed: {exc}") from exc
    try:
        return payload["choices"][0]["text"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TranslationError(f"endpoint returned no completion text: {payload!r}") from exc


_FENCE = re.compile(r"```[a-zA-Z]*\s*(.*?)```", re.DOTALL)


def extract_script_text(completion: str) -> str | None:
    """First well-formed-looking script document in a completion: a fenced
    block if present, otherwise the first balanced bracket region."""
    fenced = _FENCE.search(completion)
    if fenced:
        inner = fenced.group(1).strip()
        if inner.startswith("["):
            return inner
    start = completion.find("[")
    while start != -1:
        depth = 0
        in_string = False
        escape = False
        for i in range(start, len(completion)):
            ch = completion[i]
            if in_string:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    return completion[start:i + 1]
        start = completion.find("[", start + 1)
    return None


def translate_llm(text: str, endpoint: EndpointConfig,
                  template: PromptTemplate | None = None,
                  post=None, api_key: str | None = None) -> TranslationResult:
    """One endpoint round plus one self-repair retry with the diagnostics
    appended; anything still invalid fails closed."""
    template = template or default_template()
    post = post or _default_post
    cat = catalog()
    started = time.perf_counter()
    prompt = build_prompt(text, template)
    last_problem = "extraction failed"
    raw = None
    for attempt in range(2):
        raw = post(endpoint, prompt, api_key)
        extracted = extract_script_text(raw)
        if extracted is None:
            diagnostics_text = "no script document found in the completion"
        else:
            try:
                script = parse(extracted)
                errors = [d for d in validate(script, cat) if d.severity == "error"]
                if not errors:
                    latency = (time.perf_counter() - started) * 1000.0
                    return TranslationResult(script, "llm", latency, raw)
                diagnostics_text = "; ".join(str(d) for d in errors)
            except ScriptError as exc:
                diagnostics_text = "; ".join(str(d) for d in exc.diagnostics)
        last_problem = diagnostics_text
        if attempt == 0:
            prompt = (
                f"{build_prompt(text, template)}\n"
                f"The previous reply was rejected: {diagnostics_text}\n"
                "Reply with exactly one valid JSON script array.\nScript:"
            )
    raise TranslationError(f"validation failed twice: {last_problem}")


# --------------------------------------------------------------------------
# Strategy front door.

STRATEGIES = ("rule", "llm", "hybrid")


def translate(text: str, strategy: str = "rule",
              endpoint: EndpointConfig | None = None,
              template: PromptTemplate | None = None,
              post=None, api_key: str | None = None) -> TranslationResult:
    if strategy not in STRATEGIES:
        raise TranslationError(f"unknown strategy {strategy!r}")
    started = time.perf_counter()
    if strategy in ("rule", "hybrid"):
        script = translate_rule_based(text)
        if script is not None:
            problems = [d for d in validate(script, catalog()) if d.severity == "error"]
            if problems:
                raise TranslationError(f"rule produced an invalid script: {problems[0]}")
            latency = (time.perf_counter() - started) * 1000.0
            return TranslationResult(script, "rule_based", latency)
        if strategy == "rule":
            raise NoTranslationError(f"no translation for {text!r}")
    if endpoint is None:
        raise TranslationError("llm strategy requires an endpoint config")
    return translate_llm(text, endpoint, template, post, api_key)
