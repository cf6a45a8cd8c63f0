"""Linking extracted features to KB entities and deriving risk context."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .features import SemanticItem, keyword_occurrences, phrase_occurrences
from .kb import RISK_CATEGORIES, KnowledgeBase, risk_labels_for
from .similarity import IdfTable, SimilarityMethod, similarity_tokens
from .textnorm import normalize

DEFAULT_THRESHOLD = 0.75
DEFAULT_METHOD = SimilarityMethod.TFIDF_COSINE
# Near-misses this far under the threshold are kept, unaccepted, for review.
AUDIT_MARGIN = 0.1

_OVERLAP_METHODS = frozenset(
    {
        SimilarityMethod.JACCARD,
        SimilarityMethod.COSINE,
        SimilarityMethod.TFIDF_COSINE,
    }
)


class FeatureKind(str, Enum):
    NAMED_ENTITY = "named_entity"
    LOCATION = "location"
    KEYWORD = "keyword"
    PHRASE = "phrase"


@dataclass(frozen=True, slots=True)
class FeatureRef:
    kind: FeatureKind
    text: str
    surface: str
    start: int
    end: int


@dataclass(frozen=True, slots=True)
class FeatureLink:
    feature: FeatureRef
    entity_id: str
    method: SimilarityMethod
    score: float
    accepted: bool


@dataclass(frozen=True, slots=True)
class ContextualizedArtifact:
    item_id: str
    links: tuple[FeatureLink, ...]
    risk_labels: frozenset[str]
    risky: bool


@dataclass(frozen=True)
class AliasCatalog:
    """Alias strings pre-tokenized once per KB for fast scoring."""

    aliases: tuple[tuple[str, tuple[str, ...], tuple[str, ...]], ...]
    by_token: dict[str, tuple[int, ...]]

    @classmethod
    def from_kb(cls, kb: KnowledgeBase) -> "AliasCatalog":
        aliases = []
        by_token: dict[str, set[int]] = {}
        for alias, entity_ids in sorted(kb.alias_index.items()):
            tokens = tuple(normalize(alias).split())
            if not tokens:
                continue
            position = len(aliases)
            aliases.append((alias, tokens, entity_ids))
            for token in tokens:
                by_token.setdefault(token, set()).add(position)
        return cls(
            aliases=tuple(aliases),
            by_token={t: tuple(sorted(p)) for t, p in by_token.items()},
        )


def alias_catalog(kb: KnowledgeBase) -> AliasCatalog:
    if not isinstance(kb.alias_catalog, AliasCatalog):
        kb.alias_catalog = AliasCatalog.from_kb(kb)
    return kb.alias_catalog


def candidate_features(item: SemanticItem) -> list[FeatureRef]:
    """Linkable features of an item, in deterministic order."""
    candidates = []
    for mention in item.named_entities:
        if mention.entity_type == "Location":
            continue
        candidates.append(
            FeatureRef(
                kind=FeatureKind.NAMED_ENTITY,
                text=normalize(mention.surface),
                surface=mention.surface,
                start=mention.start,
                end=mention.end,
            )
        )
    for mention in item.locations:
        candidates.append(
            FeatureRef(
                kind=FeatureKind.LOCATION,
                text=normalize(mention.surface),
                surface=mention.surface,
                start=mention.start,
                end=mention.end,
            )
        )
    for text, start, end, surface in keyword_occurrences(item):
        candidates.append(
            FeatureRef(
                kind=FeatureKind.KEYWORD,
                text=text,
                surface=surface,
                start=start,
                end=end,
            )
        )
    for text, start, end, surface in phrase_occurrences(item):
        candidates.append(
            FeatureRef(
                kind=FeatureKind.PHRASE,
                text=text,
                surface=surface,
                start=start,
                end=end,
            )
        )
    return candidates


def link_features(
    item: SemanticItem,
    kb: KnowledgeBase,
    threshold: float = DEFAULT_THRESHOLD,
    method: SimilarityMethod = DEFAULT_METHOD,
    idf: IdfTable | None = None,
) -> list[FeatureLink]:
    """Link each feature to its best-matching KB entities.

    An exact alias hit settles the feature at score 1.0 (every holder of
    the alias gets a link). Otherwise the best fuzzy candidate is kept when
    it clears the threshold, or recorded unaccepted when it lands within
    the audit margin below it. Features containing digits only ever match
    exactly.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    catalog = alias_catalog(kb)
    links: list[FeatureLink] = []
    for feature in candidate_features(item):
        exact_ids = kb.alias_index.get(feature.text)
        if exact_ids:
            links.extend(
                FeatureLink(
                    feature=feature,
                    entity_id=entity_id,
                    method=method,
                    score=1.0,
                    accepted=True,
                )
                for entity_id in exact_ids
            )
            continue
        if any(ch.isdigit() for ch in feature.text):
            continue
        best = _best_fuzzy(feature.text.split(), catalog, method, idf)
        if best is None:
            continue
        score, entity_id = best
        if score >= threshold:
            accepted = True
        elif score >= threshold - AUDIT_MARGIN and score > 0.0:
            accepted = False
        else:
            continue
        links.append(
            FeatureLink(
                feature=feature,
                entity_id=entity_id,
                method=method,
                score=score,
                accepted=accepted,
            )
        )
    return links


def _best_fuzzy(
    feature_tokens: list[str],
    catalog: AliasCatalog,
    method: SimilarityMethod,
    idf: IdfTable | None,
) -> tuple[float, str] | None:
    if method in _OVERLAP_METHODS:
        positions: set[int] = set()
        for token in feature_tokens:
            positions.update(catalog.by_token.get(token, ()))
        pool = [catalog.aliases[p] for p in sorted(positions)]
    else:
        pool = list(catalog.aliases)
    best_score = 0.0
    best_entity: str | None = None
    for _alias, alias_tokens, entity_ids in pool:
        score = similarity_tokens(feature_tokens, alias_tokens, method, idf)
        for entity_id in entity_ids:
            if score > best_score or (
                score == best_score
                and best_entity is not None
                and entity_id < best_entity
            ):
                best_score = score
                best_entity = entity_id
    if best_entity is None or best_score <= 0.0:
        return None
    return best_score, best_entity


def contextualize(
    item: SemanticItem,
    kb: KnowledgeBase,
    threshold: float = DEFAULT_THRESHOLD,
    method: SimilarityMethod = DEFAULT_METHOD,
    idf: IdfTable | None = None,
) -> ContextualizedArtifact:
    """Attach accepted links and the union of their risk labels."""
    links = link_features(item, kb, threshold, method, idf)
    labels: set[str] = set()
    for link in links:
        if not link.accepted:
            continue
        category = kb.entities[link.entity_id].category
        if category in RISK_CATEGORIES:
            labels.update(risk_labels_for(kb, category))
    return ContextualizedArtifact(
        item_id=item.item_id,
        links=tuple(links),
        risk_labels=frozenset(labels),
        risky=bool(labels),
    )


def context_to_dict(ctx: ContextualizedArtifact) -> dict:
    """JSON-ready form with deterministic ordering."""
    return {
        "item_id": ctx.item_id,
        "links": [
            {
                "feature": {
                    "kind": link.feature.kind.value,
                    "text": link.feature.text,
                    "surface": link.feature.surface,
                    "start": link.feature.start,
                    "end": link.feature.end,
                },
                "entity_id": link.entity_id,
                "method": link.method.value,
                "score": link.score,
                "accepted": link.accepted,
            }
            for link in ctx.links
        ],
        "risk_labels": sorted(ctx.risk_labels),
        "risky": ctx.risky,
    }
