"""Cascade routing between a cheap sampled model and an expensive fallback.

Sample n responses from the weak model, pick a keyword-weighted
representative, measure how many responses agree with it, and escalate to
the strong model only when agreement falls below a threshold. Includes a
record/replay layer and an evaluation harness so the whole pipeline runs
offline and deterministically.
"""

from .backends import (
    BackendError,
    ChatCompletionsClient,
    LiveModel,
    MissingFixture,
    ModelSpec,
    PricingTable,
    ReplayModel,
    ReplayRecord,
    ReplayStore,
    UnknownModel,
    Usage,
    UsageLedger,
    default_pricing,
    format_usd,
    record_run,
)
from .cascade import (
    CascadeOutcome,
    CascadeParams,
    Decision,
    EmptyResponseSet,
    decide,
    run_query,
)
from .consistency import ConsistencyResult, evaluate_consistency
from .evalharness import (
    EvalItem,
    JudgeParseError,
    JudgeVerdict,
    ParseError,
    RunReport,
    SweepReport,
    baseline_select,
    judge_llm,
    judge_offline,
    load_dataset,
    run_benchmark,
    run_strong_reference,
    sweep_tau,
)
from .scoring import Corpus, IdfTable, KeywordSet, compute_idf, select_representative, top_k_keywords
from .textproc import NormalizationConfig, TokenizedResponse, load_stopwords, normalize_and_tokenize

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "CascadeOutcome",
    "CascadeParams",
    "ChatCompletionsClient",
    "ConsistencyResult",
    "Corpus",
    "Decision",
    "EmptyResponseSet",
    "EvalItem",
    "IdfTable",
    "JudgeParseError",
    "JudgeVerdict",
    "KeywordSet",
    "LiveModel",
    "MissingFixture",
    "ModelSpec",
    "NormalizationConfig",
    "ParseError",
    "PricingTable",
    "ReplayModel",
    "ReplayRecord",
    "ReplayStore",
    "RunReport",
    "SweepReport",
    "TokenizedResponse",
    "UnknownModel",
    "Usage",
    "UsageLedger",
    "baseline_select",
    "compute_idf",
    "decide",
    "default_pricing",
    "evaluate_consistency",
    "format_usd",
    "judge_llm",
    "judge_offline",
    "load_dataset",
    "load_stopwords",
    "normalize_and_tokenize",
    "record_run",
    "run_benchmark",
    "run_query",
    "run_strong_reference",
    "select_representative",
    "sweep_tau",
    "top_k_keywords",
    "__version__",
]
