"""Tests for KB loading, alias lookup, taxonomy labels and risk scores."""

from __future__ import annotations

import json

import pytest

from txcurate.kb import (
    KBError,
    apply_risk_score,
    load_kb,
    lookup_alias,
    risk_labels_for,
    save_kb,
)


@pytest.fixture()
def kb():
    return load_kb()


def write_entities(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


def entity_row(**overrides):
    row = {
        "id": "tst-alpha",
        "name": "Alpha",
        "aliases": ["alpha"],
        "category": "Organization",
        "source": "unit-test",
    }
    row.update(overrides)
    return row


class TestLoad:
    def test_bundled_fixtures_load(self, kb):
        assert len(kb.entities) > 50
        assert kb.version == 0
        categories = {e.category for e in kb.entities.values()}
        assert "Gambling" in categories
        assert "Location" in categories

    def test_alias_lookup_is_case_insensitive(self, kb):
        assert lookup_alias(kb, "SPORTSBET")[0].entity_id == "gmb-sportsbet"
        assert lookup_alias(kb, "sportsbet")[0].entity_id == "gmb-sportsbet"

    def test_shared_alias_returns_all_holders_ordered(self, kb):
        hits = lookup_alias(kb, "GetCapital")
        assert [e.entity_id for e in hits] == ["odr-getcapital", "org-getcapital"]

    def test_unknown_alias_is_empty(self, kb):
        assert lookup_alias(kb, "no such place") == ()

    def test_duplicate_id_across_files_rejected(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        write_entities(a, [entity_row()])
        write_entities(b, [entity_row(name="Alpha", category="Location")])
        with pytest.raises(KBError, match="duplicate entity id"):
            load_kb([a, b])

    def test_name_must_appear_in_aliases(self, tmp_path):
        path = tmp_path / "kb.jsonl"
        write_entities(path, [entity_row(aliases=["other"])])
        with pytest.raises(KBError, match="canonical name"):
            load_kb([path])

    def test_unknown_category_rejected(self, tmp_path):
        path = tmp_path / "kb.jsonl"
        write_entities(path, [entity_row(category="Weather")])
        with pytest.raises(KBError, match="unknown category"):
            load_kb([path])

    def test_bad_risk_score_rejected(self, tmp_path):
        path = tmp_path / "kb.jsonl"
        write_entities(path, [entity_row(risk_score=9)])
        with pytest.raises(KBError, match="risk_score"):
            load_kb([path])

    def test_invalid_json_line_rejected(self, tmp_path):
        path = tmp_path / "kb.jsonl"
        path.write_text('{"id": "x",\n')
        with pytest.raises(KBError, match="invalid JSON"):
            load_kb([path])


class TestTaxonomy:
    @pytest.mark.parametrize(
        "category,expected",
        [
            ("Sanctions", {"Country", "Legal"}),
            ("Gambling", {"Fraud"}),
            ("Taxation", {"Legal", "Credit"}),
            ("Dishonour", {"Credit"}),
            ("Overdraft", {"Credit"}),
            ("Legal", {"Legal"}),
            ("Location", set()),
            ("Organization", set()),
        ],
    )
    def test_category_labels(self, kb, category, expected):
        assert risk_labels_for(kb, category) == frozenset(expected)

    def test_unknown_category_raises(self, kb):
        with pytest.raises(KBError, match="unknown category"):
            risk_labels_for(kb, "Astrology")

    def test_roots_are_fixed(self, kb):
        assert set(kb.taxonomy.roots) == {
            "Operational", "Enterprise", "Credit", "Market", "Legal",
        }


class TestRiskScores:
    def test_mean_rounds_half_up(self, kb):
        assert apply_risk_score(kb, "gmb-sportsbet", [5, 5, 5]) == 5
        assert apply_risk_score(kb, "gmb-ladbrokes", [1, 2]) == 2

    def test_mean_is_over_all_ratings_ever(self, kb):
        assert apply_risk_score(kb, "snc-iran", [4]) == 4
        assert apply_risk_score(kb, "snc-iran", [2]) == 3
        assert kb.ratings["snc-iran"] == [4, 2]

    def test_version_bumps_per_application(self, kb):
        before = kb.version
        apply_risk_score(kb, "snc-iran", [3])
        apply_risk_score(kb, "snc-yemen", [3])
        assert kb.version == before + 2

    def test_score_lands_on_entity(self, kb):
        apply_risk_score(kb, "gmb-tab", [4, 4])
        assert kb.entities["gmb-tab"].risk_score == 4

    def test_unknown_entity_rejected(self, kb):
        with pytest.raises(KBError, match="unknown entity"):
            apply_risk_score(kb, "missing", [3])

    @pytest.mark.parametrize("ratings", [[], [0], [6], [3, 9]])
    def test_bad_ratings_rejected(self, kb, ratings):
        with pytest.raises(KBError):
            apply_risk_score(kb, "gmb-tab", ratings)


class TestRoundTrip:
    def test_save_then_load_preserves_everything(self, kb, tmp_path):
        apply_risk_score(kb, "gmb-sportsbet", [5, 4])
        apply_risk_score(kb, "snc-iran", [3])
        entities = tmp_path / "entities.jsonl"
        state = tmp_path / "state.json"
        save_kb(kb, entities, state)

        loaded = load_kb([entities], state_path=state)
        assert loaded.entities == kb.entities
        assert loaded.version == kb.version
        assert loaded.ratings == kb.ratings
        assert loaded.alias_index == kb.alias_index

    def test_save_without_state_keeps_entities_only(self, kb, tmp_path):
        entities = tmp_path / "entities.jsonl"
        save_kb(kb, entities)
        loaded = load_kb([entities])
        assert loaded.entities == kb.entities
        assert loaded.version == 0
