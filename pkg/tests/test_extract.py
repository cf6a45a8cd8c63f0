"""Tests for tokenization and semantic feature extraction."""

from __future__ import annotations

from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from txcurate.features import (
    CodeKind,
    build_gazetteers,
    classify_code,
    extract_batch,
    extract_features,
    keyword_occurrences,
    phrase_occurrences,
    pos_tag,
    resolve_date,
    stopwords,
)
from txcurate.kb import load_kb
from txcurate.records import BusinessArtifact
from txcurate.textnorm import tokenize


@pytest.fixture(scope="module")
def gazetteers():
    kb = load_kb()
    return build_gazetteers(kb.entities.values())


def artifact(description: str, item_id: str = "item-1") -> BusinessArtifact:
    return BusinessArtifact(
        item_id=item_id,
        item_type="bank_transaction",
        item_schema={
            "customer_id": 1,
            "bank_name": "ANZ",
            "transaction_date": "2020-09-22",
            "transaction_type": "Debit",
            "description": description,
            "amount": "-100.00",
        },
    )


class TestTokenize:
    def test_reference_code_description(self):
        got = tokenize("PAYMENT TO GETCAPITAL DEBIT LPT-000457859")
        assert [t.text for t in got.tokens] == [
            "payment", "to", "getcapital", "debit", "lpt-000457859",
        ]

    def test_trailing_punctuation_is_stripped(self):
        got = tokenize("EFTPOS TRANSACTION..")
        assert [t.text for t in got.tokens] == ["eftpos", "transaction"]
        assert got.tokens[1].surface == "TRANSACTION"

    def test_whitespace_runs_collapse(self):
        got = tokenize("  A   B\tC ")
        assert got.normalized == "a b c"

    def test_pure_punctuation_runs_vanish(self):
        got = tokenize("A .. -- // B")
        assert got.normalized == "a b"

    @given(st.text(max_size=80))
    @settings(max_examples=300, deadline=None)
    def test_span_fidelity(self, text):
        got = tokenize(text)
        previous_end = -1
        for token in got.tokens:
            assert 0 <= token.start < token.end <= len(text)
            assert text[token.start : token.end] == token.surface
            assert token.start > previous_end - 1
            assert token.start >= previous_end
            previous_end = token.end
            assert any(ch.isalnum() for ch in token.text)

    @given(st.text(max_size=80))
    @settings(max_examples=200, deadline=None)
    def test_normalization_is_idempotent(self, text):
        once = tokenize(text).normalized
        assert tokenize(once).normalized == once


class TestDates:
    @pytest.mark.parametrize(
        "token,expected",
        [
            ("22/09/20", date(2020, 9, 22)),
            ("04/03/2020", date(2020, 3, 4)),
            ("2020-09-22", date(2020, 9, 22)),
            ("31/12/69", date(2069, 12, 31)),
            ("01/01/70", date(1970, 1, 1)),
            ("1/2/21", date(2021, 2, 1)),
        ],
    )
    def test_resolvable(self, token, expected):
        assert resolve_date(token) == expected

    @pytest.mark.parametrize(
        "token", ["45/99/20", "31/02/20", "2020-13-01", "22/09", "abc", "2020/09/22"]
    )
    def test_unresolvable(self, token):
        assert resolve_date(token) is None


class TestCodes:
    @pytest.mark.parametrize(
        "token,kind",
        [
            ("23965109", CodeKind.ATM_CODE),
            ("lpt-000457859", CodeKind.REFERENCE_CODE),
            ("12-3456", CodeKind.REFERENCE_CODE),
            ("xx3812", CodeKind.CARD_MASK),
            ("2", CodeKind.GENERIC_NUMERIC),
            ("123456789", CodeKind.GENERIC_NUMERIC),
        ],
    )
    def test_kinds(self, token, kind):
        assert classify_code(token) == kind

    @pytest.mark.parametrize("token", ["ab-12", "xx381", "xx38123", "abc", "a-b"])
    def test_non_codes(self, token):
        assert classify_code(token) is None


class TestPos:
    @pytest.mark.parametrize(
        "token,tag",
        [
            ("withdrawal", "NOUN"),
            ("payment", "NOUN"),
            ("pay", "VERB"),
            ("monthly", "ADJ"),
            ("23965109", "NUM"),
            ("xx3812", "NUM"),
            ("zzzqqq", "OTHER"),
        ],
    )
    def test_tagging(self, token, tag):
        assert pos_tag(token) == tag


class TestGoldenExtraction:
    def test_atm_withdrawal(self, gazetteers):
        item = extract_features(
            artifact("WITHDRAWAL AT HANDYBANK AUBURN 2 23965109 22/09/20"),
            gazetteers,
        )
        orgs = [m for m in item.named_entities if m.entity_type == "Organization"]
        assert [m.surface for m in orgs] == ["HANDYBANK"]
        assert [m.surface for m in item.locations] == ["AUBURN"]
        atm = [c for c in item.special_codes if c.kind is CodeKind.ATM_CODE]
        assert [c.text for c in atm] == ["23965109"]
        generic = [
            c for c in item.special_codes if c.kind is CodeKind.GENERIC_NUMERIC
        ]
        assert [c.text for c in generic] == ["2"]
        assert [t.resolved for t in item.times] == [date(2020, 9, 22)]

    def test_lender_payment(self, gazetteers):
        item = extract_features(
            artifact("PAYMENT TO GETCAPITAL DEBIT LPT-000457859"), gazetteers
        )
        orgs = [m for m in item.named_entities if m.entity_type == "Organization"]
        assert [m.surface for m in orgs] == ["GETCAPITAL"]
        refs = [
            c for c in item.special_codes if c.kind is CodeKind.REFERENCE_CODE
        ]
        assert [c.text for c in refs] == ["lpt-000457859"]
        assert item.locations == ()
        assert item.times == ()

    def test_card_purchase(self, gazetteers):
        item = extract_features(
            artifact(
                "MACQUARIE UNIVERSITY MACQUARIE UNI NS AUS Card xx3812 "
                "Value Date 04/03/2020"
            ),
            gazetteers,
        )
        orgs = [m for m in item.named_entities if m.entity_type == "Organization"]
        assert [m.surface for m in orgs] == ["MACQUARIE UNIVERSITY"]
        masks = [c for c in item.special_codes if c.kind is CodeKind.CARD_MASK]
        assert [c.text for c in masks] == ["xx3812"]
        assert [t.resolved for t in item.times] == [date(2020, 3, 4)]
        assert item.locations == ()
        assert {"ns", "aus"} <= set(item.abbreviations)


class TestSemanticInvariants:
    def test_keywords_subset_of_tokens_without_stopwords(self, gazetteers):
        item = extract_features(
            artifact("PAYMENT TO GETCAPITAL DEBIT LPT-000457859"), gazetteers
        )
        token_texts = {t.text for t in item.tokens}
        assert set(item.keywords) <= token_texts
        assert set(item.keywords).isdisjoint(stopwords())
        assert "to" not in item.keywords

    def test_pos_tags_align_with_tokens(self, gazetteers):
        item = extract_features(
            artifact("WITHDRAWAL AT HANDYBANK AUBURN 2 23965109 22/09/20"),
            gazetteers,
        )
        assert len(item.pos_tags) == len(item.tokens)
        assert set(item.pos_tags) <= {"NOUN", "VERB", "ADJ", "NUM", "OTHER"}

    def test_spans_stay_inside_description(self, gazetteers):
        description = "TRANSFER TO CROWN CASINO MELBOURNE REF 12-345678"
        item = extract_features(artifact(description), gazetteers)
        mentions = list(item.named_entities) + list(item.locations)
        for m in mentions:
            assert description[m.start : m.end] == m.surface
        for c in item.special_codes:
            assert description[c.start : c.end] == c.surface
        for t in item.times:
            assert description[t.start : t.end] == t.surface

    def test_phrases_are_ngrams_of_kept_tokens(self, gazetteers):
        item = extract_features(
            artifact("PAYMENT TO GETCAPITAL DEBIT LPT-000457859"), gazetteers
        )
        assert "payment getcapital" in item.phrases
        assert "payment getcapital debit" in item.phrases
        assert all(len(p.split()) in (2, 3) for p in item.phrases)

    def test_sentiment_is_constant_neutral(self, gazetteers):
        a = extract_features(artifact("SALARY PAYMENT THANK YOU"), gazetteers)
        b = extract_features(artifact("DISHONOUR FEE CHARGED"), gazetteers)
        assert a.sentiment == b.sentiment == "neutral"


class TestGazetteerMatching:
    def test_longest_alias_wins(self, gazetteers):
        item = extract_features(
            artifact("EFTPOS NORTH SYDNEY PARKING"), gazetteers
        )
        assert [m.surface for m in item.locations] == ["NORTH SYDNEY"]

    def test_adjacent_single_token_location_still_found(self, gazetteers):
        item = extract_features(artifact("EFTPOS SYDNEY AUBURN"), gazetteers)
        assert [m.surface for m in item.locations] == ["SYDNEY", "AUBURN"]

    def test_repeat_mentions_collapse_to_first(self, gazetteers):
        item = extract_features(
            artifact("WOOLWORTHS AUBURN WOOLWORTHS AUBURN"), gazetteers
        )
        orgs = [m for m in item.named_entities if m.entity_type == "Organization"]
        assert len(orgs) == 1
        assert len(item.locations) == 1
        assert orgs[0].start < item.locations[0].start

    def test_case_insensitive_matching(self, gazetteers):
        item = extract_features(artifact("eftpos woolworths auburn"), gazetteers)
        orgs = [m for m in item.named_entities if m.entity_type == "Organization"]
        assert [m.surface for m in orgs] == ["woolworths"]


class TestBatch:
    def _corpus(self):
        descriptions = [
            "WITHDRAWAL AT HANDYBANK AUBURN 2 23965109 22/09/20",
            "PAYMENT TO GETCAPITAL DEBIT LPT-000457859",
            "EFTPOS WOOLWORTHS PARRAMATTA 114320 04/03/2020",
            "TRANSFER TO CROWN CASINO 99881234",
            "SALARY COMMONWEALTH BANK FORTNIGHTLY",
            "BPAY AGL ENERGY 2244668800",
            "VISA DEBIT CHEMIST WAREHOUSE BONDI xx4471",
            "ATM WITHDRAWAL 55667788 NORTH SYDNEY",
            "DIRECT DEBIT OVERDRAW FEE",
            "REFUND KMART BLACKTOWN 12/11/21",
            "OPAL TOP UP SYDNEY TRAINS",
            "PAYMENT THELOTT REF LT-9912345",
            "CARD PURCHASE MCDONALDS LIVERPOOL",
        ]
        return [artifact(d, item_id=f"item-{i}") for i, d in enumerate(descriptions)]

    def test_partitioning_matches_sequential_loop(self, gazetteers):
        corpus = self._corpus()
        oracle = [extract_features(a, gazetteers) for a in corpus]
        for partitions in (1, 2, 3, 8, len(corpus)):
            assert extract_batch(corpus, gazetteers, partitions) == oracle

    def test_too_many_partitions_is_fine(self, gazetteers):
        corpus = self._corpus()[:2]
        assert len(extract_batch(corpus, gazetteers, 10)) == 2

    def test_zero_partitions_rejected(self, gazetteers):
        with pytest.raises(ValueError):
            extract_batch([], gazetteers, 0)


class TestOccurrenceHelpers:
    def test_keyword_occurrences_have_spans(self, gazetteers):
        description = "PAYMENT TO GETCAPITAL DEBIT LPT-000457859"
        item = extract_features(artifact(description), gazetteers)
        occurrences = keyword_occurrences(item)
        assert [text for text, *_ in occurrences] == list(item.keywords)
        for text, start, end, surface in occurrences:
            assert description[start:end] == surface

    def test_phrase_occurrences_cover_phrases(self, gazetteers):
        item = extract_features(
            artifact("PAYMENT TO GETCAPITAL DEBIT LPT-000457859"), gazetteers
        )
        occurrences = phrase_occurrences(item)
        assert [text for text, *_ in occurrences] == list(item.phrases)
        texts = {text for text, *_ in occurrences}
        assert "payment getcapital" in texts
