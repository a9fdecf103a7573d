"""Deterministic normalization and tokenization of model responses.

Turns raw response text into ordered term lists and term-count maps, the
substrate every downstream frequency/rarity computation works on. All
functions here are pure: identical (text, config) pairs always produce
identical output, regardless of process or call order.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

TOKEN_PATTERNS: dict[str, re.Pattern[str]] = {
    "unicode-word": re.compile(r"\w+", re.UNICODE),
    "alphanumeric-runs": re.compile(r"[A-Za-z0-9]+"),
}

_STOPWORD_FILE = "stopwords_en.txt"


def _parse_stopword_lines(lines: list[str]) -> frozenset[str]:
    words = set()
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words.add(line)
    return frozenset(words)


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Load a stopword file: one term per line, UTF-8, '#' lines ignored."""
    text = Path(path).read_text(encoding="utf-8")
    return _parse_stopword_lines(text.splitlines())


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    """The small English stopword list shipped with the package."""
    ref = resources.files("kwcascade.data").joinpath(_STOPWORD_FILE)
    return _parse_stopword_lines(ref.read_text(encoding="utf-8").splitlines())


@dataclass(frozen=True)
class NormalizationConfig:
    """How raw text is reduced to terms.

    Stopwords are matched after lowercasing when ``lowercase`` is on, so a
    mixed-case stopword list behaves the same as a lowercase one.
    """

    lowercase: bool = True
    token_pattern: str = "alphanumeric-runs"
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    min_token_len: int = 2

    def __post_init__(self) -> None:
        if self.token_pattern not in TOKEN_PATTERNS:
            raise ValueError(
                f"unknown token_pattern {self.token_pattern!r}; "
                f"expected one of {sorted(TOKEN_PATTERNS)}"
            )
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")
        # Accept any iterable of strings but store an order-free set.
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))


@dataclass(frozen=True)
class TokenizedResponse:
    """A single response reduced to terms.

    ``terms`` preserves occurrence order; ``term_counts`` is its multiset
    view (sum of counts == len(terms)).
    """

    response_id: int
    raw_text: str
    terms: tuple[str, ...]
    term_counts: dict[str, int]

    def __post_init__(self) -> None:
        if sum(self.term_counts.values()) != len(self.terms):
            raise ValueError("term_counts totals do not match terms")
        if set(self.term_counts) != set(self.terms):
            raise ValueError("term_counts keys do not match terms")

    @classmethod
    def from_terms(
        cls, terms: list[str] | tuple[str, ...], response_id: int = 0, raw_text: str | None = None
    ) -> "TokenizedResponse":
        """Build directly from an already-tokenized term sequence."""
        terms = tuple(terms)
        if raw_text is None:
            raw_text = " ".join(terms)
        return cls(
            response_id=response_id,
            raw_text=raw_text,
            terms=terms,
            term_counts=dict(Counter(terms)),
        )

    @property
    def distinct_terms(self) -> frozenset[str]:
        return frozenset(self.term_counts)

    def is_empty(self) -> bool:
        return not self.terms


def normalize_and_tokenize(
    text: str, config: NormalizationConfig | None = None, response_id: int = 0
) -> TokenizedResponse:
    """Normalize ``text`` into a :class:`TokenizedResponse`.

    Tokens are the matches of the configured pattern, after optional
    lowercasing, with stopwords and too-short tokens dropped. Degenerate
    input (empty string, all stopwords) yields an empty term list rather
    than an error.
    """
    if config is None:
        config = NormalizationConfig()
    source = text.lower() if config.lowercase else text
    pattern = TOKEN_PATTERNS[config.token_pattern]
    terms = tuple(
        tok
        for tok in pattern.findall(source)
        if len(tok) >= config.min_token_len and tok not in config.stopwords
    )
    return TokenizedResponse(
        response_id=response_id,
        raw_text=text,
        terms=terms,
        term_counts=dict(Counter(terms)),
    )


def term_frequencies(doc: TokenizedResponse) -> dict[str, int]:
    """Raw occurrence count per term of ``doc``."""
    return dict(Counter(doc.terms))
