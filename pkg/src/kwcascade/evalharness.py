"""Evaluation pipeline over recorded fixtures.

Loads datasets, routes every query through the cascade against a replay
store, judges correctness, and aggregates accuracy/cost/usage reports,
including threshold sweeps and the classic representative-selection
baselines (greedy, random, exact-match, keyword-weighted).

Accuracy is computed over judged queries only; queries that fail (backend
error or unjudgeable verdict) are counted in n_failed and reported, never
silently dropped. Costs include every token actually consumed, including
tokens spent on queries that later failed.
"""

from __future__ import annotations

import csv
import json
import random
import re
import string
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import IO, Callable, Sequence

from .backends import (
    BackendError,
    MissingFixture,
    ModelBackend,
    ModelSpec,
    PricingTable,
    ReplayModel,
    ReplayStore,
    Usage,
    UsageLedger,
    default_pricing,
    format_usd,
)
from .cascade import CascadeOutcome, CascadeParams, Decision, EmptyResponseSet, run_query
from .scoring import Corpus, select_representative
from .textproc import NormalizationConfig

BASELINE_STRATEGIES = ("greedy", "random", "exact-match", "keyword")


class ParseError(Exception):
    """A dataset file failed to parse; message carries path and line."""


class JudgeParseError(Exception):
    """The judge's completion was not a recognizable True/False verdict."""


@dataclass(frozen=True)
class EvalItem:
    query_id: str
    question: str
    reference_answer: str

    def __post_init__(self) -> None:
        if not self.query_id:
            raise ValueError("query_id must be non-empty")
        if not self.question:
            raise ValueError("question must be non-empty")
        if not self.reference_answer:
            raise ValueError("reference_answer must be non-empty")


def load_dataset(path: str | Path, format: str = "jsonl") -> list[EvalItem]:
    """Read evaluation items in file order; ids must be unique.

    jsonl: one {"id", "question", "reference_answer"} object per line.
    truthfulqa-csv: a CSV with "Question" and "Best Answer" columns; ids
    are generated from row order (tqa-0001, ...).
    """
    if format == "jsonl":
        items = _load_jsonl_dataset(path)
    elif format == "truthfulqa-csv":
        items = _load_truthfulqa_csv(path)
    else:
        raise ParseError(f"unknown dataset format {format!r}; use jsonl or truthfulqa-csv")
    seen: set[str] = set()
    for item in items:
        if item.query_id in seen:
            raise ParseError(f"{path}: duplicate id {item.query_id!r}")
        seen.add(item.query_id)
    return items


def _load_jsonl_dataset(path: str | Path) -> list[EvalItem]:
    items = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {exc}") from None
            try:
                items.append(
                    EvalItem(
                        query_id=str(row["id"]),
                        question=row["question"],
                        reference_answer=row["reference_answer"],
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{line_no}: bad dataset row: {exc}") from None
    return items


def _load_truthfulqa_csv(path: str | Path) -> list[EvalItem]:
    items = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        fields = reader.fieldnames or []
        if "Question" not in fields or "Best Answer" not in fields:
            raise ParseError(
                f"{path}: expected 'Question' and 'Best Answer' columns, found {fields}"
            )
        for idx, row in enumerate(reader, start=1):
            question = (row.get("Question") or "").strip()
            reference = (row.get("Best Answer") or "").strip()
            if not question or not reference:
                raise ParseError(f"{path}: row {idx}: empty question or best answer")
            items.append(
                EvalItem(query_id=f"tqa-{idx:04d}", question=question, reference_answer=reference)
            )
    return items


# ---------------------------------------------------------------------------
# Judging


@dataclass(frozen=True)
class JudgeVerdict:
    query_id: str
    correct: bool
    judge_kind: str
    raw_judge_output: str

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "correct": self.correct,
            "judge_kind": self.judge_kind,
            "raw_judge_output": self.raw_judge_output,
        }


_WS_RE = re.compile(r"\s+")
_PUNCT_RE = re.compile(r"[^\w\s]+")


def normalize_for_match(text: str) -> str:
    """Lowercase, drop punctuation, collapse runs of whitespace."""
    text = _PUNCT_RE.sub("", text.lower())
    return _WS_RE.sub(" ", text).strip()


def judge_offline(answer: str, reference: str, query_id: str = "") -> JudgeVerdict:
    """Containment check: normalized reference appears inside normalized answer."""
    norm_answer = normalize_for_match(answer)
    norm_reference = normalize_for_match(reference)
    correct = bool(norm_reference) and norm_reference in norm_answer
    raw = f"containment({norm_reference!r} in {norm_answer!r}) = {correct}"
    return JudgeVerdict(query_id=query_id, correct=correct, judge_kind="offline", raw_judge_output=raw)


_JUDGE_PROMPT = (
    "You are grading an answer against a reference.\n"
    "Question: {question}\n"
    "Proposed answer: {answer}\n"
    "Reference answer: {reference}\n"
    "Reply with exactly one word: True if the proposed answer is consistent "
    "with the reference answer, otherwise False."
)


def judge_llm(
    question: str,
    answer: str,
    reference: str,
    judge_backend: ModelBackend,
    query_id: str = "",
) -> JudgeVerdict:
    """Binary verdict from a judge model.

    The completion is parsed case-insensitively after trimming whitespace
    and surrounding punctuation; anything other than true/false raises
    JudgeParseError, so an unreadable verdict is never scored as False.
    """
    prompt = _JUDGE_PROMPT.format(question=question, answer=answer, reference=reference)
    responses, _usage = judge_backend.sample(query_id or "judge", prompt)
    raw = responses[0]
    token = raw.strip().strip(string.punctuation + string.whitespace).casefold()
    if token == "true":
        correct = True
    elif token == "false":
        correct = False
    else:
        raise JudgeParseError(f"judge output not parseable as True/False: {raw!r}")
    return JudgeVerdict(query_id=query_id, correct=correct, judge_kind="llm", raw_judge_output=raw)


Judge = Callable[[str, str, str, str], JudgeVerdict]
"""(question, answer, reference, query_id) -> JudgeVerdict"""


def make_offline_judge() -> Judge:
    def judge(question: str, answer: str, reference: str, query_id: str) -> JudgeVerdict:
        return judge_offline(answer, reference, query_id=query_id)

    return judge


def make_llm_judge(backend: ModelBackend) -> Judge:
    def judge(question: str, answer: str, reference: str, query_id: str) -> JudgeVerdict:
        return judge_llm(question, answer, reference, backend, query_id=query_id)

    return judge


# ---------------------------------------------------------------------------
# Baseline representative selection


def baseline_select(
    corpus: Corpus,
    strategy: str,
    k: int = 10,
    alpha: float = 1.5,
    rng: random.Random | None = None,
) -> int:
    """Pick a representative index by one of the classic strategies.

    greedy: response 0 by convention (the designated low-temperature slot).
    random: uniform over responses; caller supplies the seeded generator.
    exact-match: lowest index in the largest cluster of responses that are
    byte-equal after normalization; size ties go to the cluster containing
    the lowest index.
    keyword: the keyword-weighted scoring selection used by the cascade.
    """
    if corpus.n == 0:
        raise ValueError("corpus must be non-empty")
    if strategy == "greedy":
        return 0
    if strategy == "random":
        if rng is None:
            raise ValueError("random strategy requires a seeded rng")
        return rng.randrange(corpus.n)
    if strategy == "exact-match":
        clusters: dict[str, list[int]] = {}
        for doc in corpus.docs:
            clusters.setdefault(normalize_for_match(doc.raw_text), []).append(doc.response_id)
        best = max(clusters.values(), key=lambda ids: (len(ids), -ids[0]))
        return best[0]
    if strategy == "keyword":
        rep_id, _scores = select_representative(corpus, k, alpha)
        return rep_id
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {BASELINE_STRATEGIES}")


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class PerQueryResult:
    """One query's outcome, verdict, or failure; failures keep their usage."""

    query_id: str
    outcome: CascadeOutcome | None
    verdict: JudgeVerdict | None
    error: str | None = None
    usage_on_failure: tuple[tuple[str, Usage], ...] = ()

    @property
    def failed(self) -> bool:
        return self.verdict is None

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "outcome": self.outcome.to_dict() if self.outcome else None,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "error": self.error,
            "usage_on_failure": [
                {"model": model, "usage": usage.to_dict()} for model, usage in self.usage_on_failure
            ],
        }


@dataclass(frozen=True)
class RunReport:
    """Aggregates for one cascade run at a fixed threshold."""

    dataset_name: str
    params: CascadeParams
    weak_model: str
    strong_model: str
    n_queries: int
    n_failed: int
    accuracy: float
    total_cost: Decimal
    strong_usage_fraction: float
    per_query: tuple[PerQueryResult, ...]

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "params": self.params.to_dict(),
            "weak_model": self.weak_model,
            "strong_model": self.strong_model,
            "n_queries": self.n_queries,
            "n_failed": self.n_failed,
            "accuracy": self.accuracy,
            "total_cost_usd": format_usd(self.total_cost),
            "strong_usage_fraction": self.strong_usage_fraction,
            "per_query": [result.to_dict() for result in self.per_query],
        }


@dataclass(frozen=True)
class ReferenceReport:
    """Strong-model-only run used as the comparison point for relative metrics."""

    dataset_name: str
    strong_model: str
    n_queries: int
    n_failed: int
    accuracy: float
    total_cost: Decimal

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "strong_model": self.strong_model,
            "n_queries": self.n_queries,
            "n_failed": self.n_failed,
            "accuracy": self.accuracy,
            "total_cost_usd": format_usd(self.total_cost),
        }


@dataclass(frozen=True)
class SweepRow:
    tau: int
    report: RunReport
    relative_performance: float | None
    relative_cost: float | None

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "report": self.report.to_dict(),
            "relative_performance": self.relative_performance,
            "relative_cost": self.relative_cost,
        }


@dataclass(frozen=True)
class SweepReport:
    dataset_name: str
    rows: tuple[SweepRow, ...]
    reference: ReferenceReport

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "rows": [row.to_dict() for row in self.rows],
            "reference": self.reference.to_dict(),
        }


def relative_performance(accuracy: float, reference_accuracy: float) -> float:
    """Percent of the reference run's accuracy, e.g. 63.89 vs 69.77 -> 91.57."""
    if reference_accuracy <= 0:
        raise ValueError("reference accuracy must be positive")
    return 100.0 * accuracy / reference_accuracy


def relative_cost(cost: Decimal, reference_cost: Decimal) -> float:
    """Percent of the reference run's cost; 100 - this is the cost reduction."""
    if reference_cost <= 0:
        raise ValueError("reference cost must be positive")
    return float(100 * cost / reference_cost)


def cost_reduction(cost: Decimal, reference_cost: Decimal) -> float:
    return 100.0 - relative_cost(cost, reference_cost)


# ---------------------------------------------------------------------------
# Benchmark runs


def _require_coverage(dataset: Sequence[EvalItem], fixtures: ReplayStore) -> None:
    missing = [item.query_id for item in dataset if item.query_id not in fixtures]
    if missing:
        shown = ", ".join(repr(query_id) for query_id in missing[:5])
        raise MissingFixture(
            f"{len(missing)} dataset queries have no replay record (first: {shown})"
        )


def _query_cost(
    result: PerQueryResult, pricing: PricingTable, weak_model: str, strong_model: str
) -> Decimal:
    total = Decimal(0)
    if result.outcome is not None:
        total += pricing.cost(weak_model, result.outcome.weak_usage)
        if result.outcome.strong_usage is not None:
            total += pricing.cost(strong_model, result.outcome.strong_usage)
    for model, usage in result.usage_on_failure:
        total += pricing.cost(model, usage)
    return total


def _aggregate(
    per_query: Sequence[PerQueryResult],
    pricing: PricingTable,
    weak_model: str,
    strong_model: str,
) -> tuple[float, float, int, Decimal]:
    """Returns (accuracy, strong_usage_fraction, n_failed, total_cost)."""
    judged = [r for r in per_query if r.verdict is not None]
    n_failed = len(per_query) - len(judged)
    accuracy = (
        sum(1 for r in judged if r.verdict.correct) / len(judged) if judged else 0.0
    )
    completed = [r for r in per_query if r.outcome is not None]
    escalated = sum(1 for r in completed if r.outcome.decision is Decision.ESCALATED)
    fraction = escalated / len(completed) if completed else 0.0
    total_cost = sum(
        (_query_cost(r, pricing, weak_model, strong_model) for r in per_query), Decimal(0)
    )
    return accuracy, fraction, n_failed, total_cost


def run_benchmark(
    dataset: Sequence[EvalItem],
    fixtures: ReplayStore,
    params: CascadeParams,
    judge: Judge,
    pricing: PricingTable | None = None,
    weak_model: str = "gpt-3.5-turbo",
    strong_model: str = "gpt-4",
    dataset_name: str = "dataset",
) -> RunReport:
    """Replay the cascade over every dataset item and judge the final answers.

    Per-query backend and judge failures become failed entries with their
    spent usage attached; anything else propagates.
    """
    pricing = pricing or default_pricing()
    _require_coverage(dataset, fixtures)
    weak = ReplayModel(fixtures, ModelSpec.weak(weak_model, n_samples=params.n_samples))
    strong = ReplayModel(fixtures, ModelSpec.strong(strong_model))

    results: list[PerQueryResult] = []
    for item in dataset:
        query_ledger = UsageLedger()
        outcome: CascadeOutcome | None = None
        verdict: JudgeVerdict | None = None
        error: str | None = None
        try:
            outcome = run_query(
                item.query_id, item.question, weak, strong, params, ledger=query_ledger
            )
            verdict = judge(item.question, outcome.final_answer, item.reference_answer, item.query_id)
        except (BackendError, EmptyResponseSet, JudgeParseError) as exc:
            error = f"{type(exc).__name__}: {exc}"
        # usage spent by a cascade that never produced an outcome would
        # otherwise vanish from the report's cost arithmetic
        stray = tuple(sorted(query_ledger.by_model().items())) if outcome is None else ()
        results.append(
            PerQueryResult(
                query_id=item.query_id,
                outcome=outcome,
                verdict=verdict,
                error=error,
                usage_on_failure=stray,
            )
        )

    accuracy, fraction, n_failed, total_cost = _aggregate(
        results, pricing, weak_model, strong_model
    )
    return RunReport(
        dataset_name=dataset_name,
        params=params,
        weak_model=weak_model,
        strong_model=strong_model,
        n_queries=len(dataset),
        n_failed=n_failed,
        accuracy=accuracy,
        total_cost=total_cost,
        strong_usage_fraction=fraction,
        per_query=tuple(results),
    )


def run_strong_reference(
    dataset: Sequence[EvalItem],
    fixtures: ReplayStore,
    judge: Judge,
    pricing: PricingTable | None = None,
    strong_model: str = "gpt-4",
    dataset_name: str = "dataset",
) -> ReferenceReport:
    """Judge the recorded strong response for every query (strong-only run)."""
    pricing = pricing or default_pricing()
    _require_coverage(dataset, fixtures)
    n_correct = 0
    n_judged = 0
    total_cost = Decimal(0)
    for item in dataset:
        record = fixtures.get(item.query_id)
        total_cost += pricing.cost(strong_model, record.strong_usage)
        try:
            verdict = judge(
                item.question, record.strong_response, item.reference_answer, item.query_id
            )
        except (BackendError, JudgeParseError):
            continue
        n_judged += 1
        n_correct += 1 if verdict.correct else 0
    accuracy = n_correct / n_judged if n_judged else 0.0
    return ReferenceReport(
        dataset_name=dataset_name,
        strong_model=strong_model,
        n_queries=len(dataset),
        n_failed=len(dataset) - n_judged,
        accuracy=accuracy,
        total_cost=total_cost,
    )


def sweep_tau(
    dataset: Sequence[EvalItem],
    fixtures: ReplayStore,
    params: CascadeParams,
    judge: Judge,
    tau_range: Sequence[int] | None = None,
    pricing: PricingTable | None = None,
    weak_model: str = "gpt-3.5-turbo",
    strong_model: str = "gpt-4",
    dataset_name: str = "dataset",
) -> SweepReport:
    """One benchmark run per threshold plus the strong-only comparison point."""
    pricing = pricing or default_pricing()
    taus = list(tau_range) if tau_range is not None else list(range(1, params.n_samples + 1))
    if not taus:
        raise ValueError("tau_range must be non-empty")
    reference = run_strong_reference(
        dataset, fixtures, judge, pricing=pricing, strong_model=strong_model,
        dataset_name=dataset_name,
    )
    rows = []
    for tau in taus:
        report = run_benchmark(
            dataset,
            fixtures,
            params.with_tau(tau),
            judge,
            pricing=pricing,
            weak_model=weak_model,
            strong_model=strong_model,
            dataset_name=dataset_name,
        )
        rel_perf = (
            relative_performance(report.accuracy, reference.accuracy)
            if reference.accuracy > 0
            else None
        )
        rel_cost = (
            relative_cost(report.total_cost, reference.total_cost)
            if reference.total_cost > 0
            else None
        )
        rows.append(
            SweepRow(
                tau=tau, report=report, relative_performance=rel_perf, relative_cost=rel_cost
            )
        )
    return SweepReport(dataset_name=dataset_name, rows=tuple(rows), reference=reference)


# ---------------------------------------------------------------------------
# Baseline runs (accuracy comparison of selection strategies)


@dataclass(frozen=True)
class BaselineReport:
    dataset_name: str
    strategy: str
    n_queries: int
    n_failed: int
    accuracy: float
    total_cost: Decimal

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "strategy": self.strategy,
            "n_queries": self.n_queries,
            "n_failed": self.n_failed,
            "accuracy": self.accuracy,
            "total_cost_usd": format_usd(self.total_cost),
        }


def run_baseline(
    dataset: Sequence[EvalItem],
    fixtures: ReplayStore,
    strategy: str,
    judge: Judge,
    k: int = 10,
    alpha: float = 1.5,
    seed: int = 0,
    pricing: PricingTable | None = None,
    weak_model: str = "gpt-3.5-turbo",
    normalization: NormalizationConfig | None = None,
    dataset_name: str = "dataset",
) -> BaselineReport:
    """Accuracy of one selection strategy over the recorded weak samples.

    Baselines never escalate, so cost is the weak sampling cost alone.
    The greedy strategy prefers the recorded greedy_response field and
    falls back to weak_responses[0] when it is absent. One generator,
    seeded once, drives every random choice in dataset order.
    """
    pricing = pricing or default_pricing()
    _require_coverage(dataset, fixtures)
    normalization = normalization or NormalizationConfig()
    rng = random.Random(seed)
    n_correct = 0
    n_judged = 0
    total_cost = Decimal(0)
    for item in dataset:
        record = fixtures.get(item.query_id)
        total_cost += pricing.cost(weak_model, record.weak_usage)
        if strategy == "greedy" and record.greedy_response is not None:
            answer = record.greedy_response
        else:
            corpus = Corpus.from_texts(list(record.weak_responses), normalization)
            rep_id = baseline_select(corpus, strategy, k=k, alpha=alpha, rng=rng)
            answer = record.weak_responses[rep_id]
        try:
            verdict = judge(item.question, answer, item.reference_answer, item.query_id)
        except (BackendError, JudgeParseError):
            continue
        n_judged += 1
        n_correct += 1 if verdict.correct else 0
    accuracy = n_correct / n_judged if n_judged else 0.0
    return BaselineReport(
        dataset_name=dataset_name,
        strategy=strategy,
        n_queries=len(dataset),
        n_failed=len(dataset) - n_judged,
        accuracy=accuracy,
        total_cost=total_cost,
    )


# ---------------------------------------------------------------------------
# Serialization


def write_run_json(report: RunReport, sink: IO[str]) -> None:
    json.dump(report.to_dict(), sink, sort_keys=True, indent=2, ensure_ascii=False)
    sink.write("\n")


def write_sweep_json(sweep: SweepReport, sink: IO[str]) -> None:
    json.dump(sweep.to_dict(), sink, sort_keys=True, indent=2, ensure_ascii=False)
    sink.write("\n")


SWEEP_CSV_COLUMNS = ("tau", "accuracy", "total_cost_usd", "strong_usage_fraction", "n_queries", "n_failed")


def write_sweep_csv(sweep: SweepReport, sink: IO[str]) -> None:
    """Frontier table, one row per threshold, fixed formatting for diffability."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(SWEEP_CSV_COLUMNS)
    for row in sweep.rows:
        report = row.report
        writer.writerow(
            [
                row.tau,
                f"{report.accuracy:.6f}",
                format_usd(report.total_cost),
                f"{report.strong_usage_fraction:.6f}",
                report.n_queries,
                report.n_failed,
            ]
        )
