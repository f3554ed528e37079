"""Normalization helpers for place phrases and answer strings."""

from __future__ import annotations

import re

ARTICLES = {"the", "a", "an"}
LEADING_PREPOSITIONS = {"in", "at", "on", "inside", "into", "within", "near"}

# State values carrying any of these deny co-location and resolve to the null
# node ("outside the crawlspace", "absent", "left the room", "not in ...").
NEGATION_TOKENS = {"outside", "absent", "left", "away"}
_NOT_IN_RE = re.compile(r"\bnot\s+in\b")
_WORD_RE = re.compile(r"[a-z]+")


def normalize_place(raw: str) -> str:
    """Lowercase a place phrase and drop punctuation, hyphens, articles, and
    leading prepositions: ``"in the Waiting-Room."`` -> ``"waiting room"``."""
    s = raw.casefold().replace("-", " ")
    s = re.sub(r"[^\w\s]", " ", s)
    tokens = s.split()
    while tokens and tokens[0] in LEADING_PREPOSITIONS:
        tokens.pop(0)
    tokens = [t for t in tokens if t not in ARTICLES]
    return " ".join(tokens)


def is_negated_place(raw: str) -> bool:
    s = raw.casefold()
    if _NOT_IN_RE.search(s):
        return True
    return bool(set(_WORD_RE.findall(s)) & NEGATION_TOKENS)


def normalize_answer(raw: str) -> str:
    """Answer-matching normal form: lowercase, no punctuation, no articles."""
    s = raw.casefold().replace("-", " ")
    s = re.sub(r"[^\w\s]", " ", s)
    tokens = [t for t in s.split() if t not in ARTICLES]
    return " ".join(tokens)
