"""Domain knowledge base: entities, risk taxonomy, alias lookup, scores."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path
from typing import Iterable

RISK_CATEGORIES = (
    "Legal",
    "Taxation",
    "Overdraft",
    "Sanctions",
    "Dishonour",
    "Gambling",
)
NON_RISK_CATEGORIES = ("Location", "Organization")
CATEGORIES = RISK_CATEGORIES + NON_RISK_CATEGORIES

RISK_LABELS = (
    "Country",
    "Legal",
    "Fraud",
    "Credit",
    "Operational",
    "Market",
    "Enterprise",
)
TAXONOMY_ROOTS = ("Operational", "Enterprise", "Credit", "Market", "Legal")


class KBError(ValueError):
    """Raised when KB files are malformed or an argument is invalid."""


@dataclass(frozen=True, slots=True)
class DomainEntity:
    entity_id: str
    name: str
    aliases: tuple[str, ...]
    category: str
    source: str
    risk_score: int | None = None


@dataclass(frozen=True, slots=True)
class RiskTaxonomy:
    roots: dict[str, tuple[str, ...]]
    category_labels: dict[str, frozenset[str]]


@dataclass(slots=True)
class KnowledgeBase:
    entities: dict[str, DomainEntity]
    taxonomy: RiskTaxonomy
    version: int = 0
    # Every rating ever applied, per entity; the score is the running mean.
    ratings: dict[str, list[int]] = field(default_factory=dict)
    alias_index: dict[str, tuple[str, ...]] = field(default_factory=dict)
    # Lazily built by the linking module; derived data, not part of equality.
    alias_catalog: object = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.alias_index:
            self.alias_index = _build_alias_index(self.entities)


def _build_alias_index(
    entities: dict[str, DomainEntity]
) -> dict[str, tuple[str, ...]]:
    index: dict[str, set[str]] = {}
    for entity in entities.values():
        for alias in entity.aliases:
            index.setdefault(alias.lower(), set()).add(entity.entity_id)
    return {alias: tuple(sorted(ids)) for alias, ids in index.items()}


def default_kb_paths() -> list[Path]:
    data = resources.files("txcurate").joinpath("data")
    return [Path(str(data / "kb_risk.jsonl")), Path(str(data / "kb_gazetteer.jsonl"))]


def default_taxonomy_path() -> Path:
    return Path(str(resources.files("txcurate").joinpath("data/taxonomy.json")))


def load_taxonomy(path: str | Path) -> RiskTaxonomy:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise KBError(f"taxonomy file {path} is not valid JSON: {exc}") from exc
    roots = raw.get("roots")
    labels = raw.get("category_labels")
    if not isinstance(roots, dict) or not isinstance(labels, dict):
        raise KBError(f"taxonomy file {path} needs roots and category_labels")
    if set(roots) != set(TAXONOMY_ROOTS):
        raise KBError(
            f"taxonomy roots must be {sorted(TAXONOMY_ROOTS)}, got {sorted(roots)}"
        )
    category_labels: dict[str, frozenset[str]] = {}
    for category, values in labels.items():
        if category not in CATEGORIES:
            raise KBError(f"taxonomy maps unknown category {category!r}")
        bad = set(values) - set(RISK_LABELS)
        if bad:
            raise KBError(f"unknown risk labels for {category}: {sorted(bad)}")
        category_labels[category] = frozenset(values)
    missing = set(CATEGORIES) - set(category_labels)
    if missing:
        raise KBError(f"taxonomy misses categories: {sorted(missing)}")
    return RiskTaxonomy(
        roots={root: tuple(children) for root, children in roots.items()},
        category_labels=category_labels,
    )


def load_kb(
    paths: Iterable[str | Path] | None = None,
    taxonomy_path: str | Path | None = None,
    state_path: str | Path | None = None,
) -> KnowledgeBase:
    """Load entities from JSON-lines files plus the taxonomy.

    Without arguments the bundled fixtures are used. A state file, when
    given and present, restores the KB version and the cumulative rating
    log from an earlier save_kb call.
    """
    if paths is None:
        paths = default_kb_paths()
    taxonomy = load_taxonomy(taxonomy_path or default_taxonomy_path())

    entities: dict[str, DomainEntity] = {}
    for path in paths:
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise KBError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            entity = _parse_entity(raw, f"{path}:{lineno}")
            if entity.entity_id in entities:
                raise KBError(
                    f"{path}:{lineno}: duplicate entity id {entity.entity_id!r}"
                )
            entities[entity.entity_id] = entity

    version = 0
    ratings: dict[str, list[int]] = {}
    if state_path is not None and Path(state_path).exists():
        state = json.loads(Path(state_path).read_text(encoding="utf-8"))
        version = int(state.get("version", 0))
        ratings = {
            entity_id: [int(r) for r in values]
            for entity_id, values in state.get("ratings", {}).items()
        }
    return KnowledgeBase(
        entities=entities, taxonomy=taxonomy, version=version, ratings=ratings
    )


def _parse_entity(raw: dict, where: str) -> DomainEntity:
    if not isinstance(raw, dict):
        raise KBError(f"{where}: entity line must be a JSON object")
    entity_id = raw.get("id")
    name = raw.get("name")
    aliases = raw.get("aliases")
    category = raw.get("category")
    source = raw.get("source")
    if not entity_id or not isinstance(entity_id, str):
        raise KBError(f"{where}: missing entity id")
    if not name or not isinstance(name, str):
        raise KBError(f"{where}: entity {entity_id!r} has no name")
    if not isinstance(aliases, list) or not aliases:
        raise KBError(f"{where}: entity {entity_id!r} needs a non-empty alias list")
    lowered = {str(a).lower() for a in aliases}
    if name.lower() not in lowered:
        raise KBError(
            f"{where}: aliases of {entity_id!r} must include the canonical name"
        )
    if category not in CATEGORIES:
        raise KBError(f"{where}: entity {entity_id!r} has unknown category {category!r}")
    if not source or not isinstance(source, str):
        raise KBError(f"{where}: entity {entity_id!r} has no source")
    risk_score = raw.get("risk_score")
    if risk_score is not None:
        if not isinstance(risk_score, int) or not 1 <= risk_score <= 5:
            raise KBError(
                f"{where}: risk_score of {entity_id!r} must be an int in 1..5"
            )
    return DomainEntity(
        entity_id=entity_id,
        name=name,
        aliases=tuple(str(a) for a in aliases),
        category=category,
        source=source,
        risk_score=risk_score,
    )


def save_kb(
    kb: KnowledgeBase,
    entities_path: str | Path,
    state_path: str | Path | None = None,
) -> None:
    """Write entities as JSON-lines plus, optionally, version/rating state."""
    lines = []
    for entity_id in sorted(kb.entities):
        entity = kb.entities[entity_id]
        raw: dict = {
            "id": entity.entity_id,
            "name": entity.name,
            "aliases": list(entity.aliases),
            "category": entity.category,
            "source": entity.source,
        }
        if entity.risk_score is not None:
            raw["risk_score"] = entity.risk_score
        lines.append(json.dumps(raw, sort_keys=True))
    Path(entities_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if state_path is not None:
        state = {
            "version": kb.version,
            "ratings": {
                entity_id: list(values)
                for entity_id, values in sorted(kb.ratings.items())
            },
        }
        Path(state_path).write_text(
            json.dumps(state, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def lookup_alias(kb: KnowledgeBase, surface: str) -> tuple[DomainEntity, ...]:
    """All entities carrying the alias, case-insensitively, by entity id."""
    ids = kb.alias_index.get(surface.lower(), ())
    return tuple(kb.entities[entity_id] for entity_id in ids)


def risk_labels_for(kb: KnowledgeBase, category: str) -> frozenset[str]:
    try:
        return kb.taxonomy.category_labels[category]
    except KeyError:
        raise KBError(f"unknown category {category!r}") from None


def apply_risk_score(
    kb: KnowledgeBase, entity_id: str, ratings: Iterable[int]
) -> int:
    """Fold new expert ratings into an entity's risk score.

    The score is the mean of every rating ever applied to the entity,
    rounded half-up to an integer. Each call bumps the KB version.
    """
    if entity_id not in kb.entities:
        raise KBError(f"unknown entity {entity_id!r}")
    new_ratings = [int(r) for r in ratings]
    if not new_ratings:
        raise KBError("need at least one rating")
    for rating in new_ratings:
        if not 1 <= rating <= 5:
            raise KBError(f"rating {rating} outside 1..5")
    log = kb.ratings.setdefault(entity_id, [])
    log.extend(new_ratings)
    mean = Decimal(sum(log)) / Decimal(len(log))
    score = int(mean.to_integral_value(rounding=ROUND_HALF_UP))
    kb.entities[entity_id] = replace(kb.entities[entity_id], risk_score=score)
    kb.version += 1
    return score
