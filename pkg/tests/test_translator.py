"""Command translation: normalization, rules, prompting, endpoint route."""
from __future__ import annotations

import json

import pytest

from graftarena.actions import catalog
from graftarena.script import ActionSpec, ConditionSpec, serialize, validate
from graftarena.translator import (
    EndpointConfig,
    NoTranslationError,
    PromptTemplate,
    TranslationError,
    build_prompt,
    default_template,
    extract_script_text,
    normalize,
    translate,
    translate_llm,
    translate_rule_based,
)


class TestNormalize:
    def test_synonyms_and_stopwords(self):
        assert normalize("Attack to the enemy!") == ["attack", "to", "the", "opponent"]

    def test_empty(self):
        assert normalize("") == []
        assert normalize("   !!!   ") == []

    def test_case_folding(self):
        assert normalize("THUNDERBOLT") == ["thunderbolt"]

    def test_possessive(self):
        assert normalize("the opponent's hp") == ["the", "opponent", "hp"]


def script_text(text):
    script = translate_rule_based(text)
    return None if script is None else serialize(script)


class TestRuleBased:
    @pytest.mark.parametrize("command,expected", [
        ("Keep doing thunderbolt",
         '[{"node":"repeat","count":"forever"},{"node":"action","kind":"thunderbolt"}]'),
        ("Continue to thunderbolt",
         '[{"node":"repeat","count":"forever"},{"node":"action","kind":"thunderbolt"}]'),
        ("Escape from opponent", '[{"node":"action","kind":"retreat_from_opponent"}]'),
        ("Escape", '[{"node":"action","kind":"retreat_from_opponent"}]'),
        ("Go behind the opponent", '[{"node":"action","kind":"go_behind_opponent"}]'),
        ("Attack to the enemy",
         '[{"node":"action","kind":"face_opponent"},{"node":"action","kind":"thunderbolt"}]'),
        ("tackle", '[{"node":"action","kind":"tackle"}]'),
        ("use iron tail", '[{"node":"action","kind":"iron_tail"}]'),
        ("tackle 3 times",
         '[{"node":"repeat","count":3},{"node":"action","kind":"tackle"}]'),
        ("do thunderbolt twice",
         '[{"node":"repeat","count":2},{"node":"action","kind":"thunderbolt"}]'),
        ("stop", '[{"node":"action","kind":"idle"}]'),
        ("move forward",
         '[{"node":"action","kind":"move_direction","params":{"dir":"forward"}}]'),
        ("then tackle", '[{"node":"then"},{"node":"action","kind":"tackle"}]'),
        ("after that, escape",
         '[{"node":"then"},{"node":"action","kind":"retreat_from_opponent"}]'),
    ])
    def test_command_table(self, command, expected):
        assert script_text(command) == expected

    def test_conditional_with_comma(self):
        script = translate_rule_based("if opponent hp below 50, retreat")
        assert script.sequence == (ConditionSpec(
            "opponent_hp_below", {"value": 50},
            (ActionSpec("retreat_from_opponent"),),
        ),)

    def test_conditional_without_comma(self):
        script = translate_rule_based("when opponent hp below 50 stop")
        assert script.sequence == (ConditionSpec(
            "opponent_hp_below", {"value": 50}, (ActionSpec("idle"),),
        ),)

    def test_compound_commands(self):
        script = translate_rule_based("face the opponent and tackle")
        assert script.sequence == (ActionSpec("face_opponent"), ActionSpec("tackle"))

    def test_no_match_cases(self):
        assert translate_rule_based("The same action") is None
        assert translate_rule_based("dance a waltz") is None
        assert translate_rule_based("") is None

    def test_determinism(self):
        texts = ["Keep doing thunderbolt", "if opponent hp below 50, retreat and escape"]
        for text in texts:
            first = script_text(text)
            assert all(script_text(text) == first for _ in range(5))

    def test_everything_validates(self):
        cat = catalog()
        commands = [
            "tackle", "thunderbolt", "iron tail", "attack", "stop", "escape",
            "keep doing tackle", "tackle 5 times", "go behind the opponent",
            "move backward", "walk right", "face the opponent",
            "approach the opponent", "if distance below 2, iron tail",
            "when the opponent is in front, thunderbolt",
            "whenever my hp is below 30, escape", "then keep doing thunderbolt",
            "after 40 ticks, tackle",
        ]
        for text in commands:
            script = translate_rule_based(text)
            assert script is not None, text
            assert not [d for d in validate(script, cat) if d.severity == "error"], text


class TestPrompt:
    def test_golden_prompt(self):
        template = PromptTemplate(
            "Translate battle commands into scripts.\n\n{exemplars}Command: {command}\nScript:",
            exemplars=(
                ("tackle", '[{"node":"action","kind":"tackle"}]'),
                ("stop", '[{"node":"action","kind":"idle"}]'),
            ),
        )
        assert build_prompt("Keep doing thunderbolt", template) == (
            "Translate battle commands into scripts.\n\n"
            'Command: tackle\nScript: [{"node":"action","kind":"tackle"}]\n\n'
            'Command: stop\nScript: [{"node":"action","kind":"idle"}]\n\n'
            "Command: Keep doing thunderbolt\nScript:"
        )

    def test_zero_exemplars(self):
        template = PromptTemplate("{exemplars}Do: {command}", exemplars=())
        assert build_prompt("x", template) == "Do: x"

    def test_invalid_exemplar_rejected(self):
        with pytest.raises(ValueError):
            PromptTemplate("{command}", exemplars=(("fly", '[{"node":"action","kind":"fly"}]'),))

    def test_missing_command_slot_rejected(self):
        with pytest.raises(ValueError):
            PromptTemplate("no slot here")

    def test_default_template_is_stable(self):
        first = build_prompt("tackle", default_template())
        assert build_prompt("tackle", default_template()) == first
        assert "Command: tackle\nScript:" in first


class TestExtraction:
    def test_bare_array(self):
        assert extract_script_text('[{"node":"then"}]') == '[{"node":"then"}]'

    def test_fenced_block(self):
        completion = "Sure!\n```json\n[{\"node\":\"action\",\"kind\":\"tackle\"}]\n```\nDone."
        assert extract_script_text(completion) == '[{"node":"action","kind":"tackle"}]'

    def test_prose_with_embedded_array(self):
        completion = 'The script [{"node":"action","kind":"idle"}] should work.'
        assert extract_script_text(completion) == '[{"node":"action","kind":"idle"}]'

    def test_nested_brackets(self):
        doc = '[{"node":"condition","kind":"distance_below","params":{"value":2},"true":[{"node":"action","kind":"idle"}]}]'
        assert extract_script_text(f"answer: {doc} trailing [junk") == doc

    def test_nothing_found(self):
        assert extract_script_text("I cannot help with that.") is None


ENDPOINT = EndpointConfig(base_url="http://mock.invalid", model="m")


def make_post(replies):
    replies = list(replies)
    calls = []

    def post(endpoint, prompt, api_key):
        calls.append(prompt)
        return replies.pop(0)

    post.calls = calls
    return post


class TestLlmRoute:
    def test_valid_completion(self):
        post = make_post(['[{"node":"action","kind":"tackle"}]'])
        result = translate_llm("tackle", ENDPOINT, post=post)
        assert result.source == "llm"
        assert serialize(result.script) == '[{"node":"action","kind":"tackle"}]'

    def test_fenced_completion(self):
        post = make_post(['Here:\n```\n[{"node":"action","kind":"idle"}]\n```'])
        result = translate_llm("stop", ENDPOINT, post=post)
        assert serialize(result.script) == '[{"node":"action","kind":"idle"}]'

    def test_retry_with_diagnostics_then_success(self):
        post = make_post([
            '[{"node":"action","kind":"fly"}]',
            '[{"node":"action","kind":"tackle"}]',
        ])
        result = translate_llm("tackle", ENDPOINT, post=post)
        assert serialize(result.script) == '[{"node":"action","kind":"tackle"}]'
        assert len(post.calls) == 2
        assert "rejected" in post.calls[1]
        assert "fly" in post.calls[1]

    def test_garbage_twice_fails_closed(self):
        post = make_post(["no script here", "still nothing"])
        with pytest.raises(TranslationError):
            translate_llm("tackle", ENDPOINT, post=post)
        assert len(post.calls) == 2


class TestHttpTransport:
    def test_real_http_round_trip(self):
        import http.server
        import threading

        seen = {}

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                seen["body"] = body
                seen["auth"] = self.headers.get("Authorization")
                payload = json.dumps(
                    {"choices": [{"text": '[{"node":"action","kind":"tackle"}]'}]}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            endpoint = EndpointConfig(
                base_url=f"http://127.0.0.1:{server.server_port}", model="m1")
            result = translate_llm("tackle", endpoint, api_key="sekrit")
            assert serialize(result.script) == '[{"node":"action","kind":"tackle"}]'
            assert seen["body"]["model"] == "m1"
            assert seen["body"]["temperature"] == 0.0
            assert seen["body"]["max_tokens"] == 256
            assert "Command: tackle" in seen["body"]["prompt"]
            assert seen["auth"] == "Bearer sekrit"
        finally:
            server.shutdown()
            thread.join()

    def test_unreachable_endpoint(self):
        endpoint = EndpointConfig(base_url="http://127.0.0.1:9", timeout=0.5)
        with pytest.raises(TranslationError):
            translate_llm("tackle", endpoint)


class TestStrategies:
    def test_rule_strategy(self):
        result = translate("tackle", strategy="rule")
        assert result.source == "rule_based"
        assert result.latency_ms >= 0

    def test_rule_strategy_no_match(self):
        with pytest.raises(NoTranslationError):
            translate("dance a waltz", strategy="rule")

    def test_hybrid_prefers_rules(self):
        post = make_post([])  # would raise if consulted
        result = translate("tackle", strategy="hybrid", endpoint=ENDPOINT, post=post)
        assert result.source == "rule_based"
        assert post.calls == []

    def test_hybrid_falls_back(self):
        post = make_post(['[{"node":"action","kind":"iron_tail"}]'])
        result = translate("perform the spinning tail move", strategy="hybrid",
                           endpoint=ENDPOINT, post=post)
        assert result.source == "llm"

    def test_llm_requires_endpoint(self):
        with pytest.raises(TranslationError):
            translate("tackle", strategy="llm")

    def test_unknown_strategy(self):
        with pytest.raises(TranslationError):
            translate("tackle", strategy="telepathy")
