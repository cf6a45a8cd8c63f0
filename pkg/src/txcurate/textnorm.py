"""Tokenization of raw transaction descriptions with source spans."""

from __future__ import annotations

from dataclasses import dataclass

# Characters that survive inside a token. Hyphens and slashes stay because
# reference codes ("LPT-000457859") and dates ("22/09/20") must remain whole.
_KEPT_PUNCT = frozenset("-/")


@dataclass(frozen=True, slots=True)
class Token:
    """One normalized token plus the span of its source text."""

    text: str
    start: int
    end: int
    surface: str


@dataclass(frozen=True, slots=True)
class Tokenized:
    original: str
    tokens: tuple[Token, ...]
    normalized: str


def tokenize(text: str) -> Tokenized:
    """Lowercase, strip punctuation except '-' and '/', split on whitespace.

    Every token records the half-open [start, end) span of the original text
    it was derived from; slicing the original at that span yields the token's
    surface form exactly.
    """
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        token = _clean_run(text, i, j)
        if token is not None:
            tokens.append(token)
        i = j
    return Tokenized(
        original=text,
        tokens=tuple(tokens),
        normalized=" ".join(t.text for t in tokens),
    )


def normalize(text: str) -> str:
    """Normalized form of a description, used as a dedup key component."""
    return tokenize(text).normalized


def _clean_run(text: str, start: int, end: int) -> Token | None:
    kept: list[str] = []
    first = -1
    last = -1
    has_alnum = False
    for pos in range(start, end):
        ch = text[pos]
        if ch.isalnum() or ch in _KEPT_PUNCT:
            kept.append(ch.lower())
            if first < 0:
                first = pos
            last = pos
            if ch.isalnum():
                has_alnum = True
    # A run of pure punctuation ("..", lone "-") is noise, not a token.
    if not has_alnum:
        return None
    return Token(
        text="".join(kept),
        start=first,
        end=last + 1,
        surface=text[first : last + 1],
    )
