"""Semantic feature extraction from transaction descriptions."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

from .records import BusinessArtifact
from .textnorm import Token, Tokenized, tokenize

POS_TAGS = ("NOUN", "VERB", "ADJ", "NUM", "OTHER")
ENTITY_TYPES = ("Person", "Organization", "Product", "Location", "Other")


class CodeKind(str, Enum):
    ATM_CODE = "atm_code"
    REFERENCE_CODE = "reference_code"
    CARD_MASK = "card_mask"
    GENERIC_NUMERIC = "generic_numeric"


@dataclass(frozen=True, slots=True)
class SpecialCode:
    text: str
    kind: CodeKind
    start: int
    end: int
    surface: str


@dataclass(frozen=True, slots=True)
class EntityMention:
    surface: str
    entity_type: str
    start: int
    end: int


@dataclass(frozen=True, slots=True)
class TimeMention:
    surface: str
    resolved: date
    start: int
    end: int


@dataclass(frozen=True, slots=True)
class SemanticItem:
    item_id: str
    tokens: tuple[Token, ...]
    keywords: tuple[str, ...]
    phrases: tuple[str, ...]
    abbreviations: tuple[str, ...]
    special_codes: tuple[SpecialCode, ...]
    pos_tags: tuple[str, ...]
    named_entities: tuple[EntityMention, ...]
    times: tuple[TimeMention, ...]
    locations: tuple[EntityMention, ...]
    # Placeholder channel: descriptions carry no usable polarity, so every
    # item reports the same neutral value until a real model replaces it.
    sentiment: str = "neutral"


@dataclass(frozen=True)
class Gazetteer:
    """Alias lookup over normalized token tuples for one entity section."""

    entries: dict[tuple[str, ...], tuple[str, ...]]
    max_len: int

    @classmethod
    def from_aliases(cls, pairs: Iterable[tuple[str, str]]) -> "Gazetteer":
        entries: dict[tuple[str, ...], set[str]] = {}
        for alias, entity_id in pairs:
            key = tuple(tokenize(alias).normalized.split())
            if key:
                entries.setdefault(key, set()).add(entity_id)
        return cls(
            entries={key: tuple(sorted(ids)) for key, ids in entries.items()},
            max_len=max((len(key) for key in entries), default=0),
        )


@dataclass(frozen=True)
class GazetteerBundle:
    organizations: Gazetteer
    locations: Gazetteer


def build_gazetteers(entities: Iterable) -> GazetteerBundle:
    """Split KB entities into the organization and location gazetteers.

    Accepts any iterable of objects with aliases/category/entity_id, so the
    KB module stays import-free of this one.
    """
    org_pairs = []
    loc_pairs = []
    for entity in entities:
        pairs = [(alias, entity.entity_id) for alias in entity.aliases]
        if entity.category == "Organization":
            org_pairs.extend(pairs)
        elif entity.category == "Location":
            loc_pairs.extend(pairs)
    return GazetteerBundle(
        organizations=Gazetteer.from_aliases(org_pairs),
        locations=Gazetteer.from_aliases(loc_pairs),
    )


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    return frozenset(_data_words("stopwords.txt"))


@lru_cache(maxsize=1)
def abbreviation_terms() -> frozenset[str]:
    return frozenset(_data_words("abbreviations.txt"))


@lru_cache(maxsize=1)
def pos_lexicon() -> dict[str, str]:
    lexicon = {}
    for line in _data_lines("pos_lexicon.txt"):
        word, _, tag = line.partition("\t")
        if tag in POS_TAGS:
            lexicon[word] = tag
    return lexicon


def _data_lines(name: str) -> list[str]:
    text = resources.files("txcurate").joinpath(f"data/{name}").read_text("utf-8")
    return [
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]


def _data_words(name: str) -> list[str]:
    return [line.split()[0] for line in _data_lines(name)]


_DMY = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{2}|\d{4})$")
_ISO = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_ATM = re.compile(r"^\d{8}$")
_CARD = re.compile(r"^xx(\d{4})$")
_NUMERIC = re.compile(r"^\d+$")
_REFERENCE = re.compile(r"^[a-z0-9]+(?:-[a-z0-9]+)+$")


def resolve_date(text: str) -> date | None:
    """Resolve a date-shaped token; day-first for slashed forms."""
    match = _DMY.match(text)
    if match:
        day, month, raw_year = match.groups()
        year = int(raw_year)
        if len(raw_year) == 2:
            year = 2000 + year if year < 70 else 1900 + year
        try:
            return date(year, int(month), int(day))
        except ValueError:
            return None
    match = _ISO.match(text)
    if match:
        year, month, day = (int(g) for g in match.groups())
        try:
            return date(year, month, day)
        except ValueError:
            return None
    return None


def classify_code(text: str) -> CodeKind | None:
    if _ATM.match(text):
        return CodeKind.ATM_CODE
    if _CARD.match(text):
        return CodeKind.CARD_MASK
    if _NUMERIC.match(text):
        return CodeKind.GENERIC_NUMERIC
    if _REFERENCE.match(text) and sum(ch.isdigit() for ch in text) >= 6:
        return CodeKind.REFERENCE_CODE
    return None


def pos_tag(token_text: str) -> str:
    if any(ch.isdigit() for ch in token_text):
        return "NUM"
    return pos_lexicon().get(token_text, "OTHER")


def _scan_gazetteer(
    tokens: Sequence[Token], gazetteer: Gazetteer, original: str
) -> list[tuple[EntityMention, tuple[str, ...]]]:
    """Greedy leftmost-longest alias scan over the token sequence."""
    found: list[tuple[EntityMention, tuple[str, ...]]] = []
    i = 0
    while i < len(tokens):
        matched = False
        for length in range(min(gazetteer.max_len, len(tokens) - i), 0, -1):
            key = tuple(t.text for t in tokens[i : i + length])
            ids = gazetteer.entries.get(key)
            if ids:
                start = tokens[i].start
                end = tokens[i + length - 1].end
                found.append(
                    (
                        EntityMention(
                            surface=original[start:end],
                            entity_type="",
                            start=start,
                            end=end,
                        ),
                        ids,
                    )
                )
                i += length
                matched = True
                break
        if not matched:
            i += 1
    return found


def _dedup_mentions(
    raw: list[tuple[EntityMention, tuple[str, ...]]], entity_type: str
) -> list[EntityMention]:
    seen: set[str] = set()
    kept = []
    for mention, ids in raw:
        if any(entity_id not in seen for entity_id in ids):
            kept.append(
                EntityMention(
                    surface=mention.surface,
                    entity_type=entity_type,
                    start=mention.start,
                    end=mention.end,
                )
            )
            seen.update(ids)
    return kept


def extract_features(
    artifact: BusinessArtifact, gazetteers: GazetteerBundle
) -> SemanticItem:
    """Derive the full semantic feature set for one artifact."""
    text = artifact.description
    tokenized: Tokenized = tokenize(text)
    tokens = tokenized.tokens

    times = []
    dated: set[int] = set()
    for idx, token in enumerate(tokens):
        resolved = resolve_date(token.text)
        if resolved is not None:
            times.append(
                TimeMention(
                    surface=token.surface,
                    resolved=resolved,
                    start=token.start,
                    end=token.end,
                )
            )
            dated.add(idx)

    codes = []
    for idx, token in enumerate(tokens):
        if idx in dated:
            continue
        kind = classify_code(token.text)
        if kind is not None:
            codes.append(
                SpecialCode(
                    text=token.text,
                    kind=kind,
                    start=token.start,
                    end=token.end,
                    surface=token.surface,
                )
            )

    tags = tuple(pos_tag(token.text) for token in tokens)

    stop = stopwords()
    keywords = _unique(t.text for t in tokens if t.text not in stop)
    kept_tokens = [t.text for t in tokens if t.text not in stop]
    phrases = _unique(_ngrams(kept_tokens, 2) + _ngrams(kept_tokens, 3))

    known_abbrev = abbreviation_terms()
    abbreviations = _unique(t.text for t in tokens if t.text in known_abbrev)

    org_mentions = _dedup_mentions(
        _scan_gazetteer(tokens, gazetteers.organizations, text), "Organization"
    )
    loc_mentions = _dedup_mentions(
        _scan_gazetteer(tokens, gazetteers.locations, text), "Location"
    )

    return SemanticItem(
        item_id=artifact.item_id,
        tokens=tokens,
        keywords=tuple(keywords),
        phrases=tuple(phrases),
        abbreviations=tuple(abbreviations),
        special_codes=tuple(codes),
        pos_tags=tags,
        named_entities=tuple(org_mentions + loc_mentions),
        times=tuple(times),
        locations=tuple(loc_mentions),
    )


def _ngrams(tokens: Sequence[str], n: int) -> list[str]:
    return [" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def _unique(items: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def extract_batch(
    artifacts: Sequence[BusinessArtifact],
    gazetteers: GazetteerBundle,
    partitions: int = 1,
) -> list[SemanticItem]:
    """Extract a whole corpus, optionally in partition-sized chunks.

    Chunking exists so partitioned runs are provably identical to the
    sequential pass; the chunks map one to one onto pipeline partitions.
    """
    if partitions < 1:
        raise ValueError(f"partitions must be >= 1, got {partitions}")
    items: list[SemanticItem] = []
    for chunk in partition_slices(len(artifacts), partitions):
        items.extend(
            extract_features(artifact, gazetteers)
            for artifact in artifacts[chunk]
        )
    return items


def partition_slices(total: int, partitions: int) -> list[slice]:
    """Contiguous, balanced slices covering range(total) in order."""
    return [
        slice(i * total // partitions, (i + 1) * total // partitions)
        for i in range(partitions)
    ]


def keyword_occurrences(item: SemanticItem) -> list[tuple[str, int, int, str]]:
    """First occurrence (text, start, end, surface) of each keyword."""
    stop = stopwords()
    seen: set[str] = set()
    out = []
    for token in item.tokens:
        if token.text in stop or token.text in seen:
            continue
        seen.add(token.text)
        out.append((token.text, token.start, token.end, token.surface))
    return out


def phrase_occurrences(item: SemanticItem) -> list[tuple[str, int, int, str]]:
    """First occurrence of each 2/3-gram over the non-stopword tokens."""
    stop = stopwords()
    kept = [t for t in item.tokens if t.text not in stop]
    seen: set[str] = set()
    out = []
    for n in (2, 3):
        for i in range(len(kept) - n + 1):
            window = kept[i : i + n]
            text = " ".join(t.text for t in window)
            if text in seen:
                continue
            seen.add(text)
            surface = " ".join(t.surface for t in window)
            out.append((text, window[0].start, window[-1].end, surface))
    return out


def semantic_item_to_dict(item: SemanticItem) -> dict:
    """JSON-ready form with deterministic content."""
    return {
        "item_id": item.item_id,
        "tokens": [
            {"text": t.text, "start": t.start, "end": t.end, "surface": t.surface}
            for t in item.tokens
        ],
        "keywords": list(item.keywords),
        "phrases": list(item.phrases),
        "abbreviations": list(item.abbreviations),
        "special_codes": [
            {
                "text": c.text,
                "kind": c.kind.value,
                "start": c.start,
                "end": c.end,
                "surface": c.surface,
            }
            for c in item.special_codes
        ],
        "pos_tags": list(item.pos_tags),
        "named_entities": [
            {
                "surface": m.surface,
                "entity_type": m.entity_type,
                "start": m.start,
                "end": m.end,
            }
            for m in item.named_entities
        ],
        "times": [
            {
                "surface": m.surface,
                "resolved": m.resolved.isoformat(),
                "start": m.start,
                "end": m.end,
            }
            for m in item.times
        ],
        "locations": [
            {
                "surface": m.surface,
                "entity_type": m.entity_type,
                "start": m.start,
                "end": m.end,
            }
            for m in item.locations
        ],
        "sentiment": item.sentiment,
    }
