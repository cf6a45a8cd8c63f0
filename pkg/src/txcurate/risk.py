"""Risk verdicts from linked context, plus the keyword-index baseline."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .features import pos_tag, stopwords
from .kb import RISK_CATEGORIES, KnowledgeBase
from .linking import ContextualizedArtifact
from .stemming import stem
from .textnorm import tokenize


@dataclass(frozen=True, slots=True)
class RiskVerdict:
    item_id: str
    predicted_risky: bool
    risk_labels: frozenset[str]
    # (entity_id, score) pairs, best first.
    evidence: tuple[tuple[str, float], ...]


@dataclass(frozen=True, slots=True)
class KeywordIndex:
    stems: frozenset[str]
    source: tuple[str, ...]


def classify_artifact(
    ctx: ContextualizedArtifact, kb: KnowledgeBase
) -> RiskVerdict:
    """Turn linked context into a verdict with supporting entities.

    Evidence cites the risk-category entities behind accepted links, each
    at its best score, ordered by score (descending) then entity id.
    """
    best: dict[str, float] = {}
    for link in ctx.links:
        if not link.accepted:
            continue
        if kb.entities[link.entity_id].category not in RISK_CATEGORIES:
            continue
        current = best.get(link.entity_id)
        if current is None or link.score > current:
            best[link.entity_id] = link.score
    evidence = tuple(
        sorted(best.items(), key=lambda pair: (-pair[1], pair[0]))
    )
    return RiskVerdict(
        item_id=ctx.item_id,
        predicted_risky=ctx.risky,
        risk_labels=ctx.risk_labels,
        evidence=evidence,
    )


def verdict_to_dict(verdict: RiskVerdict) -> dict:
    return {
        "item_id": verdict.item_id,
        "predicted_risky": verdict.predicted_risky,
        "risk_labels": sorted(verdict.risk_labels),
        "evidence": [
            {"entity_id": entity_id, "score": score}
            for entity_id, score in verdict.evidence
        ],
    }


def default_keyword_path() -> Path:
    return Path(
        str(resources.files("txcurate").joinpath("data/classic_keywords.txt"))
    )


def load_keywords(path: str | Path | None = None) -> list[str]:
    """Read the screening keyword fixture (one per line, '#' comments)."""
    text = Path(path or default_keyword_path()).read_text(encoding="utf-8")
    keywords = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            keywords.append(line)
    return keywords


def build_keyword_index(keywords: Iterable[str]) -> KeywordIndex:
    """Stem the keyword list into a membership index.

    Multi-word keywords contribute the stem of each non-stopword token, so
    a phrase keyword still matches when one of its words appears alone.
    """
    source = tuple(keywords)
    if not source:
        raise ValueError("keyword list is empty")
    stop = stopwords()
    stems = set()
    for keyword in source:
        for token in tokenize(keyword).normalized.split():
            if token not in stop:
                stems.add(stem(token))
    if not stems:
        raise ValueError("keyword list reduces to nothing after stemming")
    return KeywordIndex(stems=frozenset(stems), source=source)


def classic_classify(
    description: str, index: KeywordIndex, *, tag_pos: bool = True
) -> bool:
    """Keyword-index baseline: stem the description, test membership.

    The optional POS pass mirrors the full preprocessing chain but cannot
    change the verdict; lemma resolution is the identity here, so stems
    alone decide.
    """
    stop = stopwords()
    tokens = [t.text for t in tokenize(description).tokens if t.text not in stop]
    if tag_pos:
        for token in tokens:
            pos_tag(token)
    return any(stem(token) in index.stems for token in tokens)
