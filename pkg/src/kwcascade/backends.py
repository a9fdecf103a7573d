"""Model access layer: live HTTP client, record/replay fixtures, pricing.

Three concerns live here because they share the Usage type:

* a minimal OpenAI-style chat-completions client with bounded retries,
* a deterministic record/replay store for offline evaluation,
* dollar-cost accounting over provider-reported token counts.

Token counts always come from the provider's usage report (or the recorded
copy of it), never from local re-tokenization.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import IO, Callable, Iterable, Mapping, Protocol, Sequence

import requests

ENV_API_KEY = "KWCASCADE_API_KEY"
ENV_API_KEY_FALLBACK = "OPENAI_API_KEY"

WEAK_ROLE = "weak"
STRONG_ROLE = "strong"


class BackendError(Exception):
    """A model call failed (transport, auth, or provider error after retries)."""


class MissingFixture(BackendError):
    """Replay mode has no stored record satisfying the request."""


class UnknownModel(Exception):
    """No pricing entry exists for the requested model."""


def api_key_from_env() -> str | None:
    """Credential lookup: KWCASCADE_API_KEY first, then OPENAI_API_KEY."""
    return os.environ.get(ENV_API_KEY) or os.environ.get(ENV_API_KEY_FALLBACK)


@dataclass(frozen=True)
class Usage:
    """Token and request counts for one or more model calls."""

    input_tokens: int = 0
    output_tokens: int = 0
    n_requests: int = 0

    def __post_init__(self) -> None:
        for name in ("input_tokens", "output_tokens", "n_requests"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    def __add__(self, other: "Usage") -> "Usage":
        if not isinstance(other, Usage):
            return NotImplemented
        return Usage(
            input_tokens=self.input_tokens + other.input_tokens,
            output_tokens=self.output_tokens + other.output_tokens,
            n_requests=self.n_requests + other.n_requests,
        )

    def merge(self, other: "Usage") -> "Usage":
        return self + other

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    def to_dict(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "n_requests": self.n_requests,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Usage":
        return cls(
            input_tokens=int(data["input_tokens"]),
            output_tokens=int(data["output_tokens"]),
            n_requests=int(data["n_requests"]),
        )

    @classmethod
    def zero(cls) -> "Usage":
        return cls(0, 0, 0)


@dataclass(frozen=True)
class ModelSpec:
    """How a model is invoked: sampling temperature, choice count, role."""

    model_name: str
    role: str
    temperature: float
    n_choices: int
    max_output_tokens: int = 512

    def __post_init__(self) -> None:
        if self.role not in (WEAK_ROLE, STRONG_ROLE):
            raise ValueError(f"role must be {WEAK_ROLE!r} or {STRONG_ROLE!r}, got {self.role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.n_choices < 1:
            raise ValueError("n_choices must be >= 1")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")

    @classmethod
    def weak(
        cls,
        model_name: str = "gpt-3.5-turbo",
        n_samples: int = 10,
        max_output_tokens: int = 512,
    ) -> "ModelSpec":
        """Cheap sampled side: temperature 1.0, one choice per sample slot."""
        return cls(
            model_name=model_name,
            role=WEAK_ROLE,
            temperature=1.0,
            n_choices=n_samples,
            max_output_tokens=max_output_tokens,
        )

    @classmethod
    def strong(
        cls,
        model_name: str = "gpt-4",
        max_output_tokens: int = 512,
    ) -> "ModelSpec":
        """Expensive fallback: temperature 0.0, single deterministic response."""
        return cls(
            model_name=model_name,
            role=STRONG_ROLE,
            temperature=0.0,
            n_choices=1,
            max_output_tokens=max_output_tokens,
        )


# ---------------------------------------------------------------------------
# Pricing


@dataclass(frozen=True)
class ModelPrice:
    input_price_per_million: Decimal
    output_price_per_million: Decimal

    def __post_init__(self) -> None:
        if self.input_price_per_million < 0 or self.output_price_per_million < 0:
            raise ValueError("prices must be >= 0")


_MICRO = Decimal(1).scaleb(-6)


class PricingTable:
    """Per-model dollar prices, kept in Decimal so ledger sums never drift.

    cost() returns an exact Decimal; rounding happens only at display time
    (format_usd), otherwise per-call rounding would break additivity for
    sub-microdollar amounts.
    """

    def __init__(self, prices: Mapping[str, ModelPrice]):
        self._prices = dict(prices)

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Mapping]) -> "PricingTable":
        prices = {}
        for model_name, entry in raw.items():
            try:
                prices[model_name] = ModelPrice(
                    input_price_per_million=_as_decimal(entry["input_price_per_million"]),
                    output_price_per_million=_as_decimal(entry["output_price_per_million"]),
                )
            except KeyError as exc:
                raise ValueError(f"pricing entry for {model_name!r} is missing {exc}") from None
        return cls(prices)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "PricingTable":
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle, parse_float=Decimal, parse_int=Decimal)
        if not isinstance(raw, dict):
            raise ValueError(f"pricing config {path} must be a JSON object")
        return cls.from_mapping(raw)

    def models(self) -> list[str]:
        return sorted(self._prices)

    def __contains__(self, model_name: str) -> bool:
        return model_name in self._prices

    def price_for(self, model_name: str) -> ModelPrice:
        try:
            return self._prices[model_name]
        except KeyError:
            raise UnknownModel(
                f"no pricing entry for {model_name!r}; known models: {self.models()}"
            ) from None

    def cost(self, model_name: str, usage: Usage) -> Decimal:
        """Exact dollars: tokens/1e6 * per-million price, no rounding."""
        price = self.price_for(model_name)
        input_cost = (usage.input_tokens * price.input_price_per_million).scaleb(-6)
        output_cost = (usage.output_tokens * price.output_price_per_million).scaleb(-6)
        return input_cost + output_cost


def _as_decimal(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, bool):
        raise ValueError(f"price must be numeric, got {value!r}")
    if isinstance(value, (int, str)):
        return Decimal(value)
    if isinstance(value, float):
        return Decimal(str(value))
    raise ValueError(f"price must be numeric, got {value!r}")


def format_usd(amount: Decimal, places: int = 6) -> str:
    """Render a ledger amount for reports; quantizes only this display copy."""
    return str(amount.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN))


@lru_cache(maxsize=1)
def default_pricing() -> PricingTable:
    """Packaged prices: $30/$60 per million (gpt-4), $0.50/$1.50 (gpt-3.5-turbo)."""
    source = resources.files("kwcascade.data").joinpath("default_pricing.json")
    raw = json.loads(source.read_text(encoding="utf-8"), parse_float=Decimal, parse_int=Decimal)
    return PricingTable.from_mapping(raw)


class UsageLedger:
    """Serialized per-model usage accumulator; safe under concurrent adds."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._by_model: dict[str, Usage] = {}

    def add(self, model_name: str, usage: Usage) -> None:
        with self._lock:
            current = self._by_model.get(model_name, Usage.zero())
            self._by_model[model_name] = current + usage

    def usage_for(self, model_name: str) -> Usage:
        with self._lock:
            return self._by_model.get(model_name, Usage.zero())

    def by_model(self) -> dict[str, Usage]:
        with self._lock:
            return dict(self._by_model)

    def total_cost(self, pricing: PricingTable) -> Decimal:
        total = Decimal(0)
        for model_name, usage in sorted(self.by_model().items()):
            total += pricing.cost(model_name, usage)
        return total


# ---------------------------------------------------------------------------
# Live client


class ModelBackend(Protocol):
    """Anything that can produce responses for a query under a ModelSpec."""

    spec: ModelSpec
    deterministic: bool

    def sample(self, query_id: str, query_text: str) -> tuple[list[str], Usage]: ...


class _MultiChoiceRejected(Exception):
    """Provider returned 400 for an n>1 request; caller falls back to singles."""


class ChatCompletionsClient:
    """Thin chat-completions client over HTTP.

    Retry policy: 3 attempts with exponential backoff starting at 1 second,
    and only for transport failures, 429, and 5xx responses. Other client
    errors fail fast, with one exception: a 400 rejection of a multi-choice
    request triggers a fallback to n sequential single-choice requests.

    Safe for concurrent use; in-flight requests are capped by a semaphore.
    The sleep function is injectable so tests don't wait out the backoff.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        max_in_flight: int = 8,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._session = session or requests.Session()
        self._sleep = sleep
        self._in_flight = threading.BoundedSemaphore(max_in_flight)

    def complete(
        self,
        model: str,
        prompt: str,
        temperature: float,
        n: int = 1,
        max_tokens: int = 512,
    ) -> tuple[list[str], Usage]:
        """Request n choices for one prompt; returns (texts, merged usage)."""
        try:
            data = self._post_with_retries(self._payload(model, prompt, temperature, n, max_tokens))
        except _MultiChoiceRejected:
            return self._complete_sequentially(model, prompt, temperature, n, max_tokens)
        return self._parse_completion(data, expected_choices=n)

    def _complete_sequentially(
        self, model: str, prompt: str, temperature: float, n: int, max_tokens: int
    ) -> tuple[list[str], Usage]:
        texts: list[str] = []
        usage = Usage.zero()
        for _ in range(n):
            data = self._post_with_retries(self._payload(model, prompt, temperature, 1, max_tokens))
            choice_texts, choice_usage = self._parse_completion(data, expected_choices=1)
            texts.extend(choice_texts)
            usage = usage + choice_usage
        return texts, usage

    @staticmethod
    def _payload(model: str, prompt: str, temperature: float, n: int, max_tokens: int) -> dict:
        return {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "n": n,
            "max_tokens": max_tokens,
        }

    def _post_with_retries(self, payload: dict) -> dict:
        url = f"{self.endpoint}/chat/completions"
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: BackendError | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._in_flight:
                    response = self._session.post(
                        url, json=payload, headers=headers, timeout=self.timeout
                    )
            except requests.RequestException as exc:
                last_error = BackendError(f"transport failure calling {url}: {exc}")
            else:
                if response.status_code == 200:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise BackendError(f"non-JSON response from {url}: {exc}") from None
                if response.status_code == 400 and payload.get("n", 1) > 1:
                    raise _MultiChoiceRejected()
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = BackendError(
                        f"HTTP {response.status_code} from {url}: {response.text[:500]}"
                    )
                else:
                    raise BackendError(
                        f"HTTP {response.status_code} from {url}: {response.text[:500]}"
                    )
            if attempt < self.max_attempts:
                self._sleep(self.backoff_base * 2 ** (attempt - 1))
        assert last_error is not None
        raise last_error

    @staticmethod
    def _parse_completion(data: dict, expected_choices: int) -> tuple[list[str], Usage]:
        try:
            texts = [choice["message"]["content"] for choice in data["choices"]]
            reported = data["usage"]
            usage = Usage(
                input_tokens=int(reported["prompt_tokens"]),
                output_tokens=int(reported["completion_tokens"]),
                n_requests=1,
            )
        except (KeyError, TypeError) as exc:
            raise BackendError(f"malformed completion payload: missing {exc}") from None
        if len(texts) != expected_choices:
            raise BackendError(f"expected {expected_choices} choices, provider sent {len(texts)}")
        return texts, usage


class LiveModel:
    """Live backend: one sample() call is one (possibly multi-choice) request."""

    deterministic = False

    def __init__(self, client: ChatCompletionsClient, spec: ModelSpec):
        self._client = client
        self.spec = spec

    def sample(self, query_id: str, query_text: str) -> tuple[list[str], Usage]:
        return self._client.complete(
            model=self.spec.model_name,
            prompt=query_text,
            temperature=self.spec.temperature,
            n=self.spec.n_choices,
            max_tokens=self.spec.max_output_tokens,
        )


# ---------------------------------------------------------------------------
# Record / replay


@dataclass(frozen=True)
class ReplayRecord:
    """One query's recorded model traffic, enough to replay any threshold.

    The strong response is captured unconditionally at record time so a
    single fixture file supports every escalation threshold offline.
    greedy_response is an optional extra (temperature-0 weak answer) used
    by one of the report baselines when present.
    """

    query_id: str
    query_text: str
    weak_responses: tuple[str, ...]
    weak_usage: Usage
    strong_response: str
    strong_usage: Usage
    reference_answer: str | None = None
    greedy_response: str | None = None

    def __post_init__(self) -> None:
        if not self.query_id:
            raise ValueError("query_id must be non-empty")
        if len(self.weak_responses) < 1:
            raise ValueError("weak_responses must contain at least one response")

    def to_json_dict(self) -> dict:
        data = {
            "query_id": self.query_id,
            "query_text": self.query_text,
            "weak_responses": list(self.weak_responses),
            "weak_usage": self.weak_usage.to_dict(),
            "strong_response": self.strong_response,
            "strong_usage": self.strong_usage.to_dict(),
            "reference_answer": self.reference_answer,
        }
        if self.greedy_response is not None:
            data["greedy_response"] = self.greedy_response
        return data

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ReplayRecord":
        return cls(
            query_id=str(data["query_id"]),
            query_text=data["query_text"],
            weak_responses=tuple(data["weak_responses"]),
            weak_usage=Usage.from_dict(data["weak_usage"]),
            strong_response=data["strong_response"],
            strong_usage=Usage.from_dict(data["strong_usage"]),
            reference_answer=data.get("reference_answer"),
            greedy_response=data.get("greedy_response"),
        )


class ReplayStore:
    """Read-only index of ReplayRecords by query_id, loaded from JSON-lines."""

    def __init__(self, records: Iterable[ReplayRecord], source: str = "<memory>"):
        self._source = source
        self._records: dict[str, ReplayRecord] = {}
        for record in records:
            if record.query_id in self._records:
                raise ValueError(f"duplicate query_id {record.query_id!r} in {source}")
            self._records[record.query_id] = record

    @classmethod
    def load(cls, path: str | Path) -> "ReplayStore":
        records = []
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(ReplayRecord.from_json_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{line_no}: bad replay record: {exc}") from None
        return cls(records, source=str(path))

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._records

    def query_ids(self) -> list[str]:
        return list(self._records)

    def get(self, query_id: str) -> ReplayRecord:
        try:
            return self._records[query_id]
        except KeyError:
            raise MissingFixture(
                f"no replay record for query {query_id!r} in {self._source}"
            ) from None


class ReplayModel:
    """Deterministic backend serving recorded responses; never touches the network.

    Weak role: serves the first n_choices stored responses (prefix rule) and
    the recorded usage verbatim; truncation does not rescale token counts.
    Strong role: serves the single recorded strong response.
    """

    deterministic = True

    def __init__(self, store: ReplayStore, spec: ModelSpec):
        self._store = store
        self.spec = spec

    def sample(self, query_id: str, query_text: str) -> tuple[list[str], Usage]:
        record = self._store.get(query_id)
        if self.spec.role == WEAK_ROLE:
            stored = record.weak_responses
            if self.spec.n_choices > len(stored):
                raise MissingFixture(
                    f"replay record for {query_id!r} stores {len(stored)} weak responses, "
                    f"{self.spec.n_choices} requested"
                )
            return list(stored[: self.spec.n_choices]), record.weak_usage
        return [record.strong_response], record.strong_usage


def capture_record(
    item,
    weak: ModelBackend,
    strong: ModelBackend,
    greedy: ModelBackend | None = None,
) -> ReplayRecord:
    """Sample both models (plus the optional greedy probe) for one item.

    The item is anything with query_id, question, and reference_answer
    attributes.
    """
    weak_responses, weak_usage = weak.sample(item.query_id, item.question)
    strong_responses, strong_usage = strong.sample(item.query_id, item.question)
    greedy_response = None
    if greedy is not None:
        greedy_texts, _greedy_usage = greedy.sample(item.query_id, item.question)
        greedy_response = greedy_texts[0]
    return ReplayRecord(
        query_id=item.query_id,
        query_text=item.question,
        weak_responses=tuple(weak_responses),
        weak_usage=weak_usage,
        strong_response=strong_responses[0],
        strong_usage=strong_usage,
        reference_answer=item.reference_answer,
        greedy_response=greedy_response,
    )


def record_run(
    dataset: Sequence,
    weak: ModelBackend,
    strong: ModelBackend,
    sink: IO[str],
    greedy: ModelBackend | None = None,
    on_record: Callable[[ReplayRecord], None] | None = None,
) -> int:
    """Capture live traffic for every dataset item as JSON-lines fixtures.

    Each line is flushed as written, so an interrupted run leaves a valid
    fixture prefix. Backend errors propagate mid-file. Returns the number
    of records written.
    """
    written = 0
    for item in dataset:
        record = capture_record(item, weak, strong, greedy)
        sink.write(json.dumps(record.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        if hasattr(sink, "flush"):
            sink.flush()
        written += 1
        if on_record is not None:
            on_record(record)
    return written
