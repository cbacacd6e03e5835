"""Deterministic Arabic text utilities shared by detection, review, and analytics.

Every function here is pure. Anything that compares, counts, or fingerprints
Arabic text elsewhere in the package must go through these helpers so that the
notion of "same text" stays consistent across modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Tuple

# Tashkeel (fathatan through sukun), the combining Quranic marks directly
# above that block, dagger alef, and tatweel. Tatweel is typographic
# elongation rather than a vowel mark, but it carries no lexical content and
# is removed by the same pass.
_DIACRITIC_RANGES = (
    (0x064B, 0x0652),
    (0x0653, 0x0655),
    (0x0670, 0x0670),
    (0x0640, 0x0640),
)

DIACRITICS = frozenset(
    chr(cp) for lo, hi in _DIACRITIC_RANGES for cp in range(lo, hi + 1)
)

_STRIP_TABLE = {ord(ch): None for ch in DIACRITICS}

# Punctuation stripped from token edges. Interior punctuation is kept, so
# abbreviations and hyphenated forms survive.
TOKEN_PUNCTUATION = ".،؛؟!\"'():"


@dataclass(frozen=True)
class TokenSequence:
    """Tokens produced from one source string, with the string kept alongside."""

    tokens: Tuple[str, ...]
    source: str = field(compare=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]


def strip_diacritics(text: str) -> str:
    """Remove all diacritic codepoints, leaving every other character intact."""
    return text.translate(_STRIP_TABLE)


def has_diacritics(text: str) -> bool:
    return any(ch in DIACRITICS for ch in text)


def tokenize(text: str) -> TokenSequence:
    """Split on whitespace and strip leading/trailing punctuation per token.

    Tokens that are nothing but punctuation disappear. Diacritics are not
    touched here; strip them first when a bare-letter view is needed.
    """
    tokens = []
    for raw in text.split():
        token = raw.strip(TOKEN_PUNCTUATION)
        if token:
            tokens.append(token)
    return TokenSequence(tuple(tokens), text)


def token_count(text: str) -> int:
    return len(tokenize(text))


def normalize_for_compare(text: str) -> str:
    """Canonical form for equality checks: no diacritics, single spaces, trimmed."""
    return " ".join(strip_diacritics(text).split())
