"""Agreement measurement between the representative response and its peers.

Every response (the representative included) is re-scored under
consistency weighting anchored on the representative's own terms, and
``n_sim`` counts how many responses score at least as high as the
representative itself. The representative always counts itself, so
``n_sim`` is in [1, n].
"""

from __future__ import annotations

from dataclasses import dataclass

from .scoring import Corpus, WeightPolicy, compute_idf, top_k_keywords, weighted_score
from .textproc import TokenizedResponse


@dataclass(frozen=True)
class ConsistencyResult:
    rep_id: int
    s_star: float
    per_response_scores: tuple[tuple[int, float], ...]
    n_sim: int


def representative_keywords(rep: TokenizedResponse) -> frozenset[str]:
    """All distinct terms of the representative response."""
    return rep.distinct_terms


def evaluate_consistency(
    corpus: Corpus, rep_id: int, k: int, alpha: float, beta: float
) -> ConsistencyResult:
    """Re-score all responses anchored on response ``rep_id`` and count n_sim.

    The reference score ``s_star`` is the representative's own score under
    the same consistency weighting, not its earlier selection-mode score, so
    the >= comparison is like for like.
    """
    if not 0 <= rep_id < corpus.n:
        raise ValueError(f"rep_id {rep_id} out of range for corpus of {corpus.n}")
    if not 1 < alpha < beta:
        raise ValueError("weights must satisfy 1 < alpha < beta")

    idf = compute_idf(corpus)
    keywords = top_k_keywords(corpus, k)
    rep_terms = representative_keywords(corpus.docs[rep_id])
    policy = WeightPolicy.for_consistency(alpha, beta, keywords, rep_terms)

    scored = [weighted_score(doc, idf, policy) for doc in corpus.docs]
    s_star = scored[rep_id].score
    n_sim = sum(1 for s in scored if s.score >= s_star)
    return ConsistencyResult(
        rep_id=rep_id,
        s_star=s_star,
        per_response_scores=tuple((s.response_id, s.score) for s in scored),
        n_sim=n_sim,
    )
