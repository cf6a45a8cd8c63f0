"""Deterministic labeled corpus generator for desk-scale evaluation.

Real transaction exports cannot ship with the repository, so the harness
builds its own: templated descriptions with risk-entity aliases planted
into the risky share, benign merchants elsewhere, and a controlled band
of deliberately ambiguous benign items (lone words like CROWN or COURT
that belong to multi-word risk aliases). Labels fall straight out of the
construction.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import Decimal
from random import Random

from .features import stopwords
from .kb import RISK_CATEGORIES, KnowledgeBase, load_kb
from .records import TransactionRecord, TransactionType, to_artifact
from .risk import build_keyword_index, classic_classify, load_keywords
from .textnorm import tokenize

# Share of risky items planted with aliases the keyword baseline cannot
# see (no token of the alias survives in the screening-keyword stems),
# and share of benign items built around ambiguous lone tokens.
RARE_ALIAS_SHARE = 0.2
AMBIGUOUS_BENIGN_SHARE = 0.1

_BANKS = ["ANZ", "NAB", "Westpac", "StGeorge", "CommBank"]

# Benign merchant surfaces. Deliberately excludes GetCapital (a lender the
# KB flags), Star Car Wash and the NORTH suburbs; those appear only in the
# ambiguous band so their rate stays controlled.
_BENIGN_ORGS = [
    "HANDYBANK",
    "WOOLWORTHS",
    "WOOLWORTHS METRO",
    "COLES",
    "COLES EXPRESS",
    "ALDI",
    "IGA",
    "KMART",
    "BIG W",
    "BUNNINGS",
    "BUNNINGS WAREHOUSE",
    "OFFICEWORKS",
    "CHEMIST WAREHOUSE",
    "MCDONALDS",
    "7-ELEVEN",
    "TELSTRA",
    "AGL ENERGY",
    "AUSTRALIA POST",
    "QANTAS",
    "JB HI-FI",
    "SYDNEY TRAINS",
    "COMMONWEALTH BANK",
    "NATIONAL AUSTRALIA BANK",
]

_SUBURBS = [
    "AUBURN",
    "PARRAMATTA",
    "CHATSWOOD",
    "BONDI",
    "GEELONG",
    "SURRY HILLS",
    "NEWTOWN",
    "PENRITH",
    "LIVERPOOL",
    "RICHMOND",
    "HOBART",
    "PERTH",
    "BRISBANE",
    "MELBOURNE",
    "SYDNEY",
    "ADELAIDE",
    "DARWIN",
    "CRONULLA",
    "MANLY",
    "BURWOOD",
    "STRATHFIELD",
    "BLACKTOWN",
    "MARRICKVILLE",
    "EPPING",
    "GLEBE",
    "MASCOT",
    "KOGARAH",
    "HURSTVILLE",
]

# Each entry plants one token of a multi-word risk alias in a clearly
# benign context. The keyword baseline trips on the stemmed token; the
# linker sees too little of the alias to clear the threshold.
_AMBIGUOUS_TEMPLATES = [
    "CROWN ST PARKING {suburb}",
    "CROWN ST MEDICAL CENTRE {code4}",
    "CROWN ST NEWSAGENT {suburb}",
    "WESTFIELD FOOD COURT {suburb}",
    "FOOD COURT KIOSK {code4}",
    "FINE FOODS DELI {suburb}",
    "FINE FOODS CATERING {code4}",
    "STAR CAR WASH {suburb}",
    "EFTPOS {org} NORTH SYDNEY",
    "EFTPOS {org} NORTH RYDE",
    "KOREA TOWN BBQ {suburb}",
    "KOREA TOWN GROCERY {code4}",
    "REGISTRY OFFICE RENEWAL {code6}",
    "SHIRE OFFICE RATES {code6}",
    "ACCOUNT KEEPING FEES",
    "ANNUAL CARD FEES",
    "MONTHLY SERVICE FEE",
]

_BENIGN_TEMPLATES = [
    "EFTPOS {org} {suburb}",
    "PAYMENT TO {org} REF {ref}",
    "DIRECT DEBIT {org} {code6}",
    "WITHDRAWAL AT {org} {suburb} {code8} {shortdate}",
    "{org} {suburb} CARD xx{code4}",
    "ATM WITHDRAWAL {suburb} {code8}",
    "BPAY {org} {code6}",
    "TRANSFER FROM {org} {shortdate}",
    "PURCHASE {org} {suburb}",
]

_RISKY_TEMPLATES = [
    "PAYMENT TO {alias} {ref}",
    "DIRECT DEBIT {alias} {code6}",
    "EFTPOS {alias} {suburb}",
    "{alias} {suburb} CARD xx{code4}",
    "TRANSFER TO {alias} {shortdate}",
    "INTERNET TRANSFER {alias} REF {ref}",
    "WITHDRAWAL AT {alias} {code8}",
]


@dataclass(frozen=True, slots=True)
class CorpusSpec:
    n: int
    risky_fraction: float
    noise_rate: float
    seed: int

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        for name in ("risky_fraction", "noise_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


def plantable_aliases(kb: KnowledgeBase) -> tuple[list[str], list[str]]:
    """Split risk-entity aliases into (common, rare) planting pools.

    An alias is plantable when it survives tokenization with at most three
    non-stopword tokens and none of its tokens is a stopword; the feature
    extractor only forms phrases up to trigrams and drops stopwords, so
    anything else could never exact-match. Rare means the screening-keyword
    baseline misses the alias entirely.
    """
    stop = stopwords()
    index = build_keyword_index(load_keywords())
    common: list[str] = []
    rare: list[str] = []
    for entity_id in sorted(kb.entities):
        entity = kb.entities[entity_id]
        if entity.category not in RISK_CATEGORIES:
            continue
        for alias in entity.aliases:
            tokens = tokenize(alias).normalized.split()
            if not 1 <= len(tokens) <= 3:
                continue
            if any(t in stop for t in tokens):
                continue
            if classic_classify(alias, index):
                common.append(alias)
            else:
                rare.append(alias)
    return sorted(set(common)), sorted(set(rare))


def _typo(rng: Random, text: str) -> str:
    """Replace one alphabetic character with a different random letter."""
    positions = [i for i, ch in enumerate(text) if ch.isalpha()]
    if not positions:
        return text
    pos = rng.choice(positions)
    alphabet = string.ascii_uppercase if text[pos].isupper() else string.ascii_lowercase
    replacement = rng.choice([c for c in alphabet if c != text[pos]])
    return text[:pos] + replacement + text[pos + 1 :]


def _fill(rng: Random, template: str, alias: str | None = None) -> str:
    out = template
    if alias is not None:
        out = out.replace("{alias}", alias.upper())
    replacements = {
        "{org}": lambda: rng.choice(_BENIGN_ORGS),
        "{suburb}": lambda: rng.choice(_SUBURBS),
        "{code4}": lambda: f"{rng.randrange(10_000):04d}",
        "{code6}": lambda: f"{rng.randrange(1_000_000):06d}",
        "{code8}": lambda: f"{rng.randrange(100_000_000):08d}",
        "{ref}": lambda: f"LPT-{rng.randrange(1_000_000_000):09d}",
        "{shortdate}": lambda: _short_date(rng),
    }
    for key, make in replacements.items():
        while key in out:
            out = out.replace(key, make(), 1)
    return out


def _short_date(rng: Random) -> str:
    day = date(2019, 1, 1) + timedelta(days=rng.randrange(730))
    return day.strftime("%d/%m/%y")


def _amount(rng: Random, tx_type: TransactionType) -> Decimal:
    cents = rng.randrange(500, 200_000)
    value = Decimal(cents) / Decimal(100)
    return value if tx_type is TransactionType.CREDIT else -value


def generate_synthetic_corpus(
    spec: CorpusSpec, kb: KnowledgeBase | None = None
) -> tuple[list[TransactionRecord], dict[str, int]]:
    """Build records plus item-id labels, deterministically per seed.

    Exactly round(n * risky_fraction) items carry a planted risk alias and
    label 1. noise_rate is the chance a planted alias mention gets a
    one-character typo, which knocks out exact matching for that mention.
    """
    spec.validate()
    kb = kb or load_kb()
    rng = Random(spec.seed)
    common, rare = plantable_aliases(kb)
    if not common or not rare:
        raise ValueError("knowledge base lacks plantable risk aliases")

    risky_n = round(spec.n * spec.risky_fraction)
    rare_n = round(risky_n * RARE_ALIAS_SHARE)
    benign_n = spec.n - risky_n
    ambiguous_n = min(benign_n, round(benign_n * AMBIGUOUS_BENIGN_SHARE))

    rows: list[tuple[str, int]] = []
    for i in range(risky_n):
        alias = rare[i % len(rare)] if i < rare_n else common[i % len(common)]
        mention = alias.upper()
        if spec.noise_rate > 0 and rng.random() < spec.noise_rate:
            mention = _typo(rng, mention)
        template = rng.choice(_RISKY_TEMPLATES)
        rows.append((_fill(rng, template.replace("{alias}", mention)), 1))
    for i in range(benign_n):
        if i < ambiguous_n:
            template = _AMBIGUOUS_TEMPLATES[i % len(_AMBIGUOUS_TEMPLATES)]
        else:
            template = rng.choice(_BENIGN_TEMPLATES)
        rows.append((_fill(rng, template), 0))
    rng.shuffle(rows)

    records: list[TransactionRecord] = []
    labels: dict[str, int] = {}
    for row_index, (description, label) in enumerate(rows):
        tx_type = (
            TransactionType.CREDIT
            if rng.random() < 0.25
            else TransactionType.DEBIT
        )
        record = TransactionRecord(
            customer_id=rng.randrange(1, 801),
            bank_name=rng.choice(_BANKS),
            transaction_date=date(2019, 1, 1) + timedelta(days=rng.randrange(730)),
            transaction_type=tx_type,
            description=description,
            amount=_amount(rng, tx_type),
            row_index=row_index,
        )
        records.append(record)
        labels[to_artifact(record).item_id] = label
    return records, labels
