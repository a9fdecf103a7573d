"""Independent brute-force evaluator used as the scoring oracle.

Deliberately written from the formulas alone, without importing anything
from the package under test: plain dicts, plain loops. Term accumulation
runs in sorted-term order, matching the documented deterministic-summation
convention, so equal inputs give bit-identical floats.
"""

from __future__ import annotations

import math


def bf_idf(term_lists: list[list[str]]) -> dict[str, float]:
    n = len(term_lists)
    df: dict[str, int] = {}
    for terms in term_lists:
        for t in set(terms):
            df[t] = df.get(t, 0) + 1
    return {t: math.log((1 + n) / (1 + d)) + 1.0 for t, d in df.items()}


def bf_top_k(term_lists: list[list[str]], k: int) -> set[str]:
    totals: dict[str, int] = {}
    for terms in term_lists:
        for t in terms:
            totals[t] = totals.get(t, 0) + 1
    ranked = sorted(totals, key=lambda t: (-totals[t], t))
    return set(ranked[:k])


def bf_score(
    terms: list[str],
    idf: dict[str, float],
    global_kw: set[str],
    alpha: float,
    rep_kw: set[str] | None = None,
    beta: float | None = None,
) -> float:
    """L2-normalized weighted score of one doc; rep_kw/beta enable consistency mode."""
    counts: dict[str, int] = {}
    for t in terms:
        counts[t] = counts.get(t, 0) + 1
    total = 0.0
    sq = 0.0
    for t in sorted(counts):
        if rep_kw is not None and t in rep_kw:
            w = beta
        elif t in global_kw:
            w = alpha
        else:
            w = 1.0
        c = w * counts[t] * idf[t]
        total += c
        sq += c * c
    if sq == 0.0:
        return 0.0
    return total / math.sqrt(sq)


def bf_select(term_lists: list[list[str]], k: int, alpha: float) -> tuple[int, list[float]]:
    idf = bf_idf(term_lists)
    kw = bf_top_k(term_lists, k)
    scores = [bf_score(t, idf, kw, alpha) for t in term_lists]
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best, scores


def bf_consistency(
    term_lists: list[list[str]], rep_id: int, k: int, alpha: float, beta: float
) -> tuple[float, list[float], int]:
    idf = bf_idf(term_lists)
    kw = bf_top_k(term_lists, k)
    rep_kw = set(term_lists[rep_id])
    scores = [bf_score(t, idf, kw, alpha, rep_kw, beta) for t in term_lists]
    s_star = scores[rep_id]
    n_sim = sum(1 for s in scores if s >= s_star)
    return s_star, scores, n_sim
