"""Frequency-weighted scoring over a set of candidate responses.

Given the n sampled responses for one query, this module computes
corpus-level rarity weights (idf), extracts the globally most frequent
keywords, scores each response as an L2-normalized sum of weighted
term components, and picks the highest-scoring response as the
representative of the set.

Two weighting modes exist:

* ``selection``: frequent keywords get weight ``alpha``, everything else 1.
  Used to pick the representative response.
* ``consistency``: terms of an already-chosen representative get weight
  ``beta`` (taking precedence), frequent keywords ``alpha``, everything
  else 1, with 1 < alpha < beta. Used to measure how strongly the other
  responses agree with the representative.

All operations are pure; a Corpus and IdfTable are immutable after
construction and can be shared across threads.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Literal

from .textproc import NormalizationConfig, TokenizedResponse, normalize_and_tokenize

Mode = Literal["selection", "consistency"]


class MissingIdfTerm(Exception):
    """A document term has no idf entry (scored against the wrong corpus)."""


@dataclass(frozen=True)
class Corpus:
    """The ordered response set for one query, already tokenized."""

    docs: tuple[TokenizedResponse, ...]

    def __post_init__(self) -> None:
        if not self.docs:
            raise ValueError("corpus must contain at least one document")
        ids = [d.response_id for d in self.docs]
        if ids != list(range(len(self.docs))):
            raise ValueError("response_id values must be 0..n-1 in order")

    @property
    def n(self) -> int:
        return len(self.docs)

    @classmethod
    def from_texts(
        cls, texts: list[str], config: NormalizationConfig | None = None
    ) -> "Corpus":
        return cls(
            docs=tuple(
                normalize_and_tokenize(t, config, response_id=i) for i, t in enumerate(texts)
            )
        )

    @classmethod
    def from_term_lists(cls, term_lists: list[list[str]]) -> "Corpus":
        """Build a corpus from pre-tokenized term sequences (mainly for tests)."""
        return cls(
            docs=tuple(
                TokenizedResponse.from_terms(terms, response_id=i)
                for i, terms in enumerate(term_lists)
            )
        )


@dataclass(frozen=True)
class IdfTable:
    """Smoothed inverse-document-frequency per term of a corpus."""

    idf: dict[str, float]
    n_docs: int

    def __getitem__(self, term: str) -> float:
        try:
            return self.idf[term]
        except KeyError:
            raise MissingIdfTerm(term) from None

    def scaled(self, factor: float) -> "IdfTable":
        """A copy with every entry multiplied by ``factor`` (for invariance checks)."""
        return IdfTable(idf={t: v * factor for t, v in self.idf.items()}, n_docs=self.n_docs)


def compute_idf(corpus: Corpus) -> IdfTable:
    """idf(t) = ln((1 + n) / (1 + df(t))) + 1, df = docs containing t.

    The smoothed form keeps terms that occur in every response at a strictly
    positive weight (exactly 1.0, the table minimum), so shared-answer terms
    still contribute to scores instead of being zeroed out.
    """
    df: Counter[str] = Counter()
    for doc in corpus.docs:
        df.update(doc.distinct_terms)
    n = corpus.n
    idf = {t: math.log((1 + n) / (1 + d)) + 1.0 for t, d in df.items()}
    return IdfTable(idf=idf, n_docs=n)


@dataclass(frozen=True)
class KeywordSet:
    """The globally most frequent terms of a corpus, |terms| = min(k, vocab)."""

    terms: frozenset[str]
    k: int

    def __contains__(self, term: str) -> bool:
        return term in self.terms


def top_k_keywords(corpus: Corpus, k: int) -> KeywordSet:
    """The k terms with the largest total occurrence count across all docs.

    Ties are broken lexicographically (smaller term wins) so the result is
    stable under document reordering.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    totals: Counter[str] = Counter()
    for doc in corpus.docs:
        totals.update(doc.term_counts)
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return KeywordSet(terms=frozenset(t for t, _ in ranked[:k]), k=k)


@dataclass(frozen=True)
class WeightPolicy:
    """Resolves the multiplicative weight of a term under one of the two modes."""

    alpha: float
    global_keywords: KeywordSet
    mode: Mode = "selection"
    rep_keywords: frozenset[str] = field(default_factory=frozenset)
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.alpha <= 1:
            raise ValueError("alpha must be > 1")
        if self.mode == "consistency":
            if self.beta is None or self.beta <= self.alpha:
                raise ValueError("consistency mode requires 1 < alpha < beta")
        elif self.mode == "selection":
            if self.rep_keywords:
                raise ValueError("selection mode takes no representative keywords")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def for_selection(cls, alpha: float, global_keywords: KeywordSet) -> "WeightPolicy":
        return cls(alpha=alpha, global_keywords=global_keywords, mode="selection")

    @classmethod
    def for_consistency(
        cls,
        alpha: float,
        beta: float,
        global_keywords: KeywordSet,
        rep_keywords: frozenset[str],
    ) -> "WeightPolicy":
        return cls(
            alpha=alpha,
            global_keywords=global_keywords,
            mode="consistency",
            rep_keywords=frozenset(rep_keywords),
            beta=beta,
        )

    def weight(self, term: str) -> float:
        # Representative-term weight takes precedence over the global-keyword
        # weight when a term qualifies for both.
        if self.mode == "consistency" and term in self.rep_keywords:
            return self.beta  # type: ignore[return-value]
        if term in self.global_keywords:
            return self.alpha
        return 1.0


@dataclass(frozen=True)
class ScoredResponse:
    """One response's weighted term components and normalized score."""

    response_id: int
    components: dict[str, float]
    l2_norm: float
    score: float


def weighted_score(
    doc: TokenizedResponse, idf: IdfTable, policy: WeightPolicy
) -> ScoredResponse:
    """Score ``doc`` as sum(w_t * tf * idf) / l2_norm of that component vector.

    An empty document is the zero vector and scores 0. For nonzero vectors
    the score lies in [1, sqrt(#distinct terms)] because every component is
    non-negative. Components are accumulated in sorted term order so that
    identical term multisets produce bit-identical floats.

    Raises :class:`MissingIdfTerm` when a term of ``doc`` is absent from
    ``idf``, which signals the doc was scored against the wrong corpus.
    """
    components: dict[str, float] = {}
    for term in sorted(doc.term_counts):
        components[term] = policy.weight(term) * doc.term_counts[term] * idf[term]
    l2_norm = math.sqrt(sum(v * v for v in components.values()))
    score = sum(components.values()) / l2_norm if l2_norm > 0 else 0.0
    return ScoredResponse(
        response_id=doc.response_id, components=components, l2_norm=l2_norm, score=score
    )


def select_representative(
    corpus: Corpus, k: int, alpha: float
) -> tuple[int, list[ScoredResponse]]:
    """Pick the response with the highest selection-mode score.

    Ties go to the lowest response_id. Returns the winning id together with
    every response's score for auditing.
    """
    idf = compute_idf(corpus)
    keywords = top_k_keywords(corpus, k)
    policy = WeightPolicy.for_selection(alpha, keywords)
    scores = [weighted_score(doc, idf, policy) for doc in corpus.docs]
    rep_id = 0
    for scored in scores[1:]:
        if scored.score > scores[rep_id].score:
            rep_id = scored.response_id
    return rep_id, scores
