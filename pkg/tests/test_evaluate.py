"""Corpus harness: loading, check semantics, verdicts, determinism."""
from __future__ import annotations

import pytest

from graftarena.evaluate import (
    Check,
    CorpusEntry,
    CorpusError,
    Scenario,
    eval_corpus,
    evaluate_entry,
    load_bundled_corpus,
    load_corpus,
)


class TestLoading:
    def test_bundled_corpus_size(self):
        entries = load_bundled_corpus()
        assert len(entries) >= 36

    def test_bundled_corpus_covers_reported_commands(self):
        commands = {e.command for e in load_bundled_corpus()}
        for required in ("Keep doing thunderbolt", "Continue to thunderbolt",
                         "Escape", "Escape from opponent", "Attack to the enemy",
                         "Go behind the opponent", "The same action"):
            assert required in commands

    def test_missing_header(self):
        with pytest.raises(CorpusError):
            load_corpus('{"command":"x","expected":"good"}')

    def test_wrong_version(self):
        with pytest.raises(CorpusError):
            load_corpus('{"version":99}\n{"command":"x","expected":"good"}')

    def test_bad_entry_line_number(self):
        with pytest.raises(CorpusError) as err:
            load_corpus('{"version":1}\n{"command":"x","expected":"good","checks":[{"metric":"mood","op":"<","value":1,"within_ticks":5}]}')
        assert "line 2" in str(err.value)

    def test_check_validation(self):
        with pytest.raises(CorpusError):
            Check("distance", "<=", 1.0, 10)
        with pytest.raises(CorpusError):
            Check("attack_count", ">", 1.0, 10)  # no kind
        with pytest.raises(CorpusError):
            Check("distance", "<", 1.0, 0)


class TestVerdicts:
    def test_translation_failure_is_bad(self):
        entry = CorpusEntry("The same action", "bad")
        result = evaluate_entry(entry)
        assert result.verdict == "bad" and result.matched
        assert result.translation_error

    def test_passing_checks_are_good(self):
        entry = CorpusEntry(
            "thunderbolt", "good",
            (Check("opponent_hp", "==", 92, 50),),
        )
        result = evaluate_entry(entry)
        assert result.verdict == "good"
        assert result.checks[0].at_tick is not None

    def test_failing_check_carries_excerpt(self):
        entry = CorpusEntry(
            "stop", "good",
            (Check("opponent_hp", "<", 50, 10),),  # idling never does damage
        )
        result = evaluate_entry(entry)
        assert result.verdict == "bad"
        assert result.excerpt  # last states attached for diagnosis
        assert not result.matched

    def test_delta_checks_use_graft_baseline(self):
        entry = CorpusEntry(
            "move backward", "good",
            (Check("distance", "delta>0", 0.5, 40),),
            Scenario(spawn_distance=4.0),
        )
        assert evaluate_entry(entry).verdict == "good"

    def test_scenario_facing_away(self):
        entry = CorpusEntry(
            "face the opponent", "good",
            (Check("facing_error", "<", 0.11, 40),),
            Scenario(player_facing="away"),
        )
        result = evaluate_entry(entry)
        assert result.verdict == "good"
        # rotating half a turn takes about a second
        assert result.checks[0].at_tick >= 15

    def test_pre_commands_shape_the_scene(self):
        entry = CorpusEntry(
            "when opponent hp below 90 stop", "good",
            (Check("opponent_hp", "<", 90, 200),),
            Scenario(pre_commands=((0, "keep doing thunderbolt"),), command_at=10),
        )
        assert evaluate_entry(entry).verdict == "good"


class TestReport:
    def test_bundled_corpus_reaches_reported_ratio(self):
        report = eval_corpus(load_bundled_corpus())
        assert report.good_ratio >= 86.11
        assert not [r for r in report.results if not r.matched]

    def test_report_bytes_deterministic(self):
        first = eval_corpus(load_bundled_corpus()).to_json()
        second = eval_corpus(load_bundled_corpus()).to_json()
        assert first == second

    def test_timings_excluded_by_default(self):
        report = eval_corpus(load_bundled_corpus()[:2])
        assert "translation_ms" not in report.to_json()
        assert "translation_ms" in report.to_json(include_timings=True)
