"""End-to-end routing of one query through the weak/strong model pair.

The flow per query: sample n responses from the weak model, tokenize them,
pick the representative, count how many responses agree with it (n_sim),
and accept the representative when n_sim reaches the threshold tau,
otherwise escalate to the strong model. The weak sampling cost is always
incurred; escalation adds the strong call on top.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable

from .backends import ModelBackend, Usage, UsageLedger
from .consistency import evaluate_consistency
from .scoring import Corpus, select_representative
from .textproc import NormalizationConfig


class EmptyResponseSet(Exception):
    """The weak backend returned zero responses for a query."""


class Decision(str, Enum):
    ACCEPTED_WEAK = "accepted-weak"
    ESCALATED = "escalated"


@dataclass(frozen=True)
class CascadeParams:
    """Tunables of the routing decision.

    ``tau`` is the minimum number of agreeing responses required to accept
    the weak representative; it must lie in 1..n_samples. Weights must
    satisfy 1 < alpha < beta.
    """

    n_samples: int = 10
    k: int = 10
    alpha: float = 1.5
    beta: float = 2.0
    tau: int = 8
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 1 <= self.tau <= self.n_samples:
            raise ValueError(f"tau must be in 1..{self.n_samples}, got {self.tau}")
        if not 1 < self.alpha < self.beta:
            raise ValueError("weights must satisfy 1 < alpha < beta")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def with_tau(self, tau: int) -> "CascadeParams":
        return CascadeParams(
            n_samples=self.n_samples,
            k=self.k,
            alpha=self.alpha,
            beta=self.beta,
            tau=tau,
            normalization=self.normalization,
        )

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "tau": self.tau,
            "normalization": {
                "lowercase": self.normalization.lowercase,
                "token_pattern": self.normalization.token_pattern,
                "min_token_len": self.normalization.min_token_len,
                "n_stopwords": len(self.normalization.stopwords),
            },
        }


def decide(n_sim: int, tau: int) -> Decision:
    """Accept the weak representative iff n_sim >= tau (inclusive boundary)."""
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    return Decision.ACCEPTED_WEAK if n_sim >= tau else Decision.ESCALATED


@dataclass(frozen=True)
class CascadeOutcome:
    """Everything recorded about one routed query."""

    query_id: str
    decision: Decision
    rep_id: int
    n_sim: int
    s_star: float
    final_answer: str
    weak_usage: Usage
    strong_usage: Usage | None
    elapsed: float

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "decision": self.decision.value,
            "rep_id": self.rep_id,
            "n_sim": self.n_sim,
            "s_star": self.s_star,
            "final_answer": self.final_answer,
            "weak_usage": self.weak_usage.to_dict(),
            "strong_usage": self.strong_usage.to_dict() if self.strong_usage else None,
            "elapsed": self.elapsed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CascadeOutcome":
        return cls(
            query_id=data["query_id"],
            decision=Decision(data["decision"]),
            rep_id=data["rep_id"],
            n_sim=data["n_sim"],
            s_star=data["s_star"],
            final_answer=data["final_answer"],
            weak_usage=Usage.from_dict(data["weak_usage"]),
            strong_usage=(
                Usage.from_dict(data["strong_usage"]) if data.get("strong_usage") else None
            ),
            elapsed=data["elapsed"],
        )


def run_query(
    query_id: str,
    query_text: str,
    weak: ModelBackend,
    strong: ModelBackend,
    params: CascadeParams,
    ledger: UsageLedger | None = None,
) -> CascadeOutcome:
    """Route one query through the cascade and return the full outcome.

    Backend failures propagate; the representative weak answer is never
    silently substituted for a failed strong call, because that would
    corrupt accuracy/cost accounting downstream.

    ``elapsed`` is wall-clock time for live backends and 0.0 for
    deterministic (replay) ones, so replayed outcome streams are
    byte-identical across runs.
    """
    if weak.spec.n_choices != params.n_samples:
        raise ValueError(
            f"weak backend is configured for {weak.spec.n_choices} choices, "
            f"params request {params.n_samples}"
        )
    timed = not (weak.deterministic and strong.deterministic)
    started = time.perf_counter() if timed else 0.0

    responses, weak_usage = weak.sample(query_id, query_text)
    if not responses:
        raise EmptyResponseSet(f"weak backend returned no responses for {query_id!r}")
    if ledger is not None:
        ledger.add(weak.spec.model_name, weak_usage)

    corpus = Corpus.from_texts(list(responses), params.normalization)
    rep_id, _ = select_representative(corpus, params.k, params.alpha)
    result = evaluate_consistency(corpus, rep_id, params.k, params.alpha, params.beta)
    decision = decide(result.n_sim, params.tau)

    strong_usage: Usage | None = None
    if decision is Decision.ACCEPTED_WEAK:
        final_answer = corpus.docs[rep_id].raw_text
    else:
        strong_responses, strong_usage = strong.sample(query_id, query_text)
        if not strong_responses:
            raise EmptyResponseSet(f"strong backend returned no responses for {query_id!r}")
        final_answer = strong_responses[0]
        if ledger is not None:
            ledger.add(strong.spec.model_name, strong_usage)

    elapsed = (time.perf_counter() - started) if timed else 0.0
    return CascadeOutcome(
        query_id=query_id,
        decision=decision,
        rep_id=rep_id,
        n_sim=result.n_sim,
        s_star=result.s_star,
        final_answer=final_answer,
        weak_usage=weak_usage,
        strong_usage=strong_usage,
        elapsed=elapsed,
    )


def write_outcomes_jsonl(outcomes: Iterable[CascadeOutcome], sink: IO[str]) -> int:
    """Emit outcomes as JSON-lines; returns the number of lines written."""
    count = 0
    for outcome in outcomes:
        sink.write(json.dumps(outcome.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        count += 1
    return count
