"""Command-line front end.

Wires config files and flags into the recording, replay-evaluation, sweep,
and comparison-report workflows. All settings can come from a JSON config
file (--config); flags override file values; validation happens before any
network or file work starts.

Credentials are read from KWCASCADE_API_KEY (or OPENAI_API_KEY as a
fallback); --endpoint points the client at any chat-completions-compatible
server, including local stubs.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click

from .backends import (
    BackendError,
    ChatCompletionsClient,
    LiveModel,
    MissingFixture,
    ModelSpec,
    PricingTable,
    ReplayRecord,
    ReplayStore,
    UnknownModel,
    Usage,
    api_key_from_env,
    capture_record,
    default_pricing,
    format_usd,
    record_run,
)
from .cascade import CascadeParams
from .evalharness import (
    BASELINE_STRATEGIES,
    Judge,
    ParseError,
    load_dataset,
    make_llm_judge,
    make_offline_judge,
    relative_cost,
    relative_performance,
    run_baseline,
    run_benchmark,
    run_strong_reference,
    sweep_tau,
    write_run_json,
    write_sweep_csv,
    write_sweep_json,
)
from .textproc import NormalizationConfig, load_stopwords

DEFAULT_ENDPOINT = "https://api.openai.com/v1"

_CONFIG_ERRORS = (ParseError, MissingFixture, BackendError, UnknownModel, ValueError, OSError)


@dataclass
class RunConfig:
    """Resolved settings for one command invocation."""

    dataset: Path
    dataset_format: str
    fixtures: Path | None
    mode: str
    judge: str
    params: CascadeParams
    pricing: PricingTable
    seed: int
    weak_model: str
    strong_model: str
    judge_model: str
    endpoint: str
    max_output_tokens: int
    parallelism: int


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise click.ClickException(f"config {path} must be a JSON object")
    return raw


def _resolve(cfg: dict, overrides: dict) -> RunConfig:
    """Merge config-file values and flag overrides into a validated RunConfig."""
    merged = dict(cfg)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value

    try:
        normalization_kwargs = {}
        stopwords_path = merged.get("stopwords")
        if stopwords_path:
            normalization_kwargs["stopwords"] = load_stopwords(stopwords_path)
        for key in ("lowercase", "token_pattern", "min_token_len"):
            if merged.get(key) is not None:
                normalization_kwargs[key] = merged[key]
        params = CascadeParams(
            n_samples=int(merged.get("n_samples", 10)),
            k=int(merged.get("k", 10)),
            alpha=float(merged.get("alpha", 1.5)),
            beta=float(merged.get("beta", 2.0)),
            tau=int(merged.get("tau", 8)),
            normalization=NormalizationConfig(**normalization_kwargs),
        )
    except (TypeError, ValueError, OSError) as exc:
        raise click.ClickException(f"bad cascade parameters: {exc}")

    mode = merged.get("mode", "replay")
    if mode not in ("live", "replay"):
        raise click.ClickException(f"mode must be live or replay, got {mode!r}")
    judge = merged.get("judge", "offline")
    if judge not in ("offline", "llm"):
        raise click.ClickException(f"judge must be offline or llm, got {judge!r}")
    dataset_format = merged.get("dataset_format", "jsonl")
    if dataset_format not in ("jsonl", "truthfulqa-csv"):
        raise click.ClickException(
            f"dataset_format must be jsonl or truthfulqa-csv, got {dataset_format!r}"
        )

    dataset = merged.get("dataset")
    if not dataset:
        raise click.ClickException("a dataset path is required (--dataset or config)")

    pricing_path = merged.get("pricing")
    try:
        pricing = PricingTable.from_json_file(pricing_path) if pricing_path else default_pricing()
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"cannot load pricing {pricing_path}: {exc}")

    fixtures = merged.get("fixtures")
    parallelism = int(merged.get("parallelism", 1))
    if parallelism < 1:
        raise click.ClickException("parallelism must be >= 1")

    strong_model = merged.get("strong_model", "gpt-4")
    return RunConfig(
        dataset=Path(dataset),
        dataset_format=dataset_format,
        fixtures=Path(fixtures) if fixtures else None,
        mode=mode,
        judge=judge,
        params=params,
        pricing=pricing,
        seed=int(merged.get("seed", 0)),
        weak_model=merged.get("weak_model", "gpt-3.5-turbo"),
        strong_model=strong_model,
        judge_model=merged.get("judge_model", strong_model),
        endpoint=merged.get("endpoint", DEFAULT_ENDPOINT),
        max_output_tokens=int(merged.get("max_output_tokens", 512)),
        parallelism=parallelism,
    )


def _require_api_key() -> str:
    key = api_key_from_env()
    if not key:
        raise click.ClickException(
            "live mode needs credentials: set KWCASCADE_API_KEY (or OPENAI_API_KEY)"
        )
    return key


def _live_client(config: RunConfig) -> ChatCompletionsClient:
    return ChatCompletionsClient(endpoint=config.endpoint, api_key=_require_api_key())


def _make_judge(config: RunConfig) -> Judge:
    if config.judge == "offline":
        return make_offline_judge()
    judge_spec = ModelSpec(
        model_name=config.judge_model,
        role="strong",
        temperature=0.0,
        n_choices=1,
        max_output_tokens=16,
    )
    return make_llm_judge(LiveModel(_live_client(config), judge_spec))


def _load_items(config: RunConfig):
    try:
        return load_dataset(config.dataset, config.dataset_format)
    except (ParseError, OSError) as exc:
        raise click.ClickException(str(exc))


def _load_store(config: RunConfig) -> ReplayStore:
    if config.fixtures is None:
        raise click.ClickException("replay mode needs --fixtures")
    try:
        return ReplayStore.load(config.fixtures)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"cannot load fixtures: {exc}")


def _record_dataset(config: RunConfig, items, sink, include_greedy: bool) -> list[ReplayRecord]:
    client = _live_client(config)
    weak = LiveModel(
        client,
        ModelSpec.weak(
            config.weak_model,
            n_samples=config.params.n_samples,
            max_output_tokens=config.max_output_tokens,
        ),
    )
    strong = LiveModel(
        client, ModelSpec.strong(config.strong_model, max_output_tokens=config.max_output_tokens)
    )
    greedy = None
    if include_greedy:
        greedy_spec = ModelSpec(
            model_name=config.weak_model,
            role="weak",
            temperature=0.0,
            n_choices=1,
            max_output_tokens=config.max_output_tokens,
        )
        greedy = LiveModel(client, greedy_spec)

    written: list[ReplayRecord] = []

    def progress(record: ReplayRecord) -> None:
        written.append(record)
        click.echo(
            f"[{len(written)}/{len(items)}] {record.query_id}: "
            f"{len(record.weak_responses)} weak + 1 strong responses",
            err=True,
        )

    if config.parallelism == 1:
        record_run(items, weak, strong, sink=sink, greedy=greedy, on_record=progress)
        return written

    def emit(record: ReplayRecord) -> None:
        sink.write(json.dumps(record.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        sink.flush()
        progress(record)

    # parallel capture, but the fixture file keeps dataset order; on a
    # failure, everything before the first failing index is still flushed
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        futures = [pool.submit(capture_record, item, weak, strong, greedy) for item in items]
    first_error: Exception | None = None
    for future in futures:
        if first_error is None:
            try:
                emit(future.result())
            except Exception as exc:  # noqa: BLE001 - re-raised after the flush loop
                first_error = exc
    if first_error is not None:
        raise first_error
    return written


def _param_options(fn):
    fn = click.option("--tau", type=int, default=None, help="Acceptance threshold on n_sim.")(fn)
    fn = click.option("--alpha", type=float, default=None, help="Global keyword weight.")(fn)
    fn = click.option("--beta", type=float, default=None, help="Representative keyword weight.")(fn)
    fn = click.option("--k", type=int, default=None, help="Number of global keywords.")(fn)
    fn = click.option(
        "--n-samples", "n_samples", type=int, default=None, help="Weak responses per query."
    )(fn)
    return fn


def _io_options(fn):
    fn = click.option("--config", type=str, default=None, help="JSON config file.")(fn)
    fn = click.option("--dataset", type=str, default=None, help="Dataset path.")(fn)
    fn = click.option(
        "--dataset-format",
        "dataset_format",
        type=click.Choice(["jsonl", "truthfulqa-csv"]),
        default=None,
    )(fn)
    fn = click.option("--fixtures", type=str, default=None, help="Replay fixture JSONL path.")(fn)
    fn = click.option("--pricing", type=str, default=None, help="Pricing JSON path.")(fn)
    fn = click.option("--stopwords", type=str, default=None, help="Stopword list path.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Seed for any randomized step.")(fn)
    fn = click.option("--endpoint", type=str, default=None, help="Chat-completions endpoint URL.")(fn)
    fn = click.option("--weak-model", "weak_model", type=str, default=None)(fn)
    fn = click.option("--strong-model", "strong_model", type=str, default=None)(fn)
    return fn


@click.group()
def main() -> None:
    """Cascade routing between a cheap sampled model and an expensive fallback."""


@main.command("record")
@_io_options
@_param_options
@click.option("--out", type=str, required=True, help="Fixture file to create.")
@click.option("--include-greedy", is_flag=True, help="Also record a temperature-0 weak response.")
@click.option("--force", is_flag=True, help="Overwrite an existing fixture file.")
@click.option("--parallelism", type=int, default=None, help="Concurrent queries (default 1).")
@click.option("--max-output-tokens", "max_output_tokens", type=int, default=None)
@click.option("--judge", type=click.Choice(["offline", "llm"]), default=None, hidden=True)
def cmd_record(config, out, include_greedy, force, **overrides):
    """Capture live weak+strong responses for a dataset into replay fixtures.

    Recording never routes, so the acceptance threshold is ignored here;
    fixtures support any tau at replay time.
    """
    run_config = _resolve(_load_config_file(config), {**overrides, "mode": "live", "tau": 1})
    _require_api_key()
    items = _load_items(run_config)
    out_path = Path(out)
    if out_path.exists() and not force:
        raise click.ClickException(f"{out} already exists; pass --force to overwrite")

    totals: dict[str, Usage] = {}
    try:
        with open(out_path, "w", encoding="utf-8") as sink:
            records = _record_dataset(run_config, items, sink, include_greedy)
    except BackendError as exc:
        raise click.ClickException(f"recording aborted: {exc}")

    for record in records:
        totals[run_config.weak_model] = (
            totals.get(run_config.weak_model, Usage.zero()) + record.weak_usage
        )
        totals[run_config.strong_model] = (
            totals.get(run_config.strong_model, Usage.zero()) + record.strong_usage
        )
    click.echo(f"recorded {len(records)} queries -> {out}")
    grand_total = None
    for model, usage in sorted(totals.items()):
        cost = run_config.pricing.cost(model, usage)
        grand_total = cost if grand_total is None else grand_total + cost
        click.echo(
            f"{model}: {usage.input_tokens} in / {usage.output_tokens} out tokens "
            f"(${format_usd(cost)})"
        )
    if grand_total is not None:
        click.echo(f"total cost: ${format_usd(grand_total)}")


def _prepare_replay(run_config: RunConfig, include_greedy: bool = False):
    """Live mode records fresh fixtures first; replay mode just loads them."""
    items = _load_items(run_config)
    if run_config.mode == "live":
        if run_config.fixtures is None:
            raise click.ClickException("live mode needs --fixtures as the recording destination")
        if run_config.fixtures.exists():
            raise click.ClickException(
                f"{run_config.fixtures} already exists; refusing to re-record over it"
            )
        with open(run_config.fixtures, "w", encoding="utf-8") as sink:
            _record_dataset(run_config, items, sink, include_greedy)
    store = _load_store(run_config)
    return items, store


@main.command("run")
@_io_options
@_param_options
@click.option("--mode", type=click.Choice(["live", "replay"]), default=None)
@click.option("--judge", type=click.Choice(["offline", "llm"]), default=None)
@click.option("--report-json", "report_json", type=str, default=None, help="Write the full report here.")
def cmd_run(config, report_json, **overrides):
    """Route every dataset query through the cascade and report the metrics."""
    run_config = _resolve(_load_config_file(config), overrides)
    try:
        items, store = _prepare_replay(run_config)
        judge = _make_judge(run_config)
        report = run_benchmark(
            items,
            store,
            run_config.params,
            judge,
            pricing=run_config.pricing,
            weak_model=run_config.weak_model,
            strong_model=run_config.strong_model,
            dataset_name=run_config.dataset.name,
        )
    except _CONFIG_ERRORS as exc:
        raise click.ClickException(str(exc))

    if report_json:
        with open(report_json, "w", encoding="utf-8") as sink:
            write_run_json(report, sink)
    if report.n_failed:
        failed = [r.query_id for r in report.per_query if r.failed]
        click.echo(f"WARNING: {report.n_failed} failed queries: {', '.join(failed)}", err=True)
    click.echo(
        f"tau={run_config.params.tau} accuracy={report.accuracy:.4f} "
        f"cost=${format_usd(report.total_cost)} "
        f"strong_usage={report.strong_usage_fraction:.4f} "
        f"failed={report.n_failed}/{report.n_queries}"
    )


@main.command("sweep")
@_io_options
@_param_options
@click.option("--mode", type=click.Choice(["live", "replay"]), default=None)
@click.option("--judge", type=click.Choice(["offline", "llm"]), default=None)
@click.option("--tau-min", type=int, default=None, help="First threshold (default 1).")
@click.option("--tau-max", type=int, default=None, help="Last threshold (default n_samples).")
@click.option("--csv", "csv_out", type=str, default=None, help="Frontier CSV output path.")
@click.option("--json", "json_out", type=str, default=None, help="Full sweep JSON output path.")
def cmd_sweep(config, tau_min, tau_max, csv_out, json_out, **overrides):
    """Run the cascade once per threshold and emit the cost/accuracy frontier."""
    run_config = _resolve(_load_config_file(config), overrides)
    lo = tau_min if tau_min is not None else 1
    hi = tau_max if tau_max is not None else run_config.params.n_samples
    if not 1 <= lo <= hi <= run_config.params.n_samples:
        raise click.ClickException(
            f"bad tau range {lo}..{hi}; must fit in 1..{run_config.params.n_samples}"
        )
    try:
        items, store = _prepare_replay(run_config)
        judge = _make_judge(run_config)
        sweep = sweep_tau(
            items,
            store,
            run_config.params,
            judge,
            tau_range=range(lo, hi + 1),
            pricing=run_config.pricing,
            weak_model=run_config.weak_model,
            strong_model=run_config.strong_model,
            dataset_name=run_config.dataset.name,
        )
    except _CONFIG_ERRORS as exc:
        raise click.ClickException(str(exc))

    if csv_out:
        with open(csv_out, "w", encoding="utf-8") as sink:
            write_sweep_csv(sweep, sink)
    if json_out:
        with open(json_out, "w", encoding="utf-8") as sink:
            write_sweep_json(sweep, sink)
    for row in sweep.rows:
        rel = f" rel_perf={row.relative_performance:.2f}%" if row.relative_performance else ""
        click.echo(
            f"tau={row.tau} accuracy={row.report.accuracy:.4f} "
            f"cost=${format_usd(row.report.total_cost)} "
            f"strong_usage={row.report.strong_usage_fraction:.4f}{rel}"
        )
    click.echo(
        f"strong-only reference: accuracy={sweep.reference.accuracy:.4f} "
        f"cost=${format_usd(sweep.reference.total_cost)}"
    )


@main.command("report")
@_io_options
@_param_options
@click.option("--judge", type=click.Choice(["offline", "llm"]), default=None)
@click.option("--json", "json_out", type=str, default=None, help="Comparison JSON output path.")
def cmd_report(config, json_out, **overrides):
    """Compare the cascade against the selection baselines and the strong model."""
    run_config = _resolve(_load_config_file(config), overrides)
    try:
        items = _load_items(run_config)
        store = _load_store(run_config)
        judge = _make_judge(run_config)
        cascade_report = run_benchmark(
            items,
            store,
            run_config.params,
            judge,
            pricing=run_config.pricing,
            weak_model=run_config.weak_model,
            strong_model=run_config.strong_model,
            dataset_name=run_config.dataset.name,
        )
        reference = run_strong_reference(
            items,
            store,
            judge,
            pricing=run_config.pricing,
            strong_model=run_config.strong_model,
            dataset_name=run_config.dataset.name,
        )
        baselines = [
            run_baseline(
                items,
                store,
                strategy,
                judge,
                k=run_config.params.k,
                alpha=run_config.params.alpha,
                seed=run_config.seed,
                pricing=run_config.pricing,
                weak_model=run_config.weak_model,
                normalization=run_config.params.normalization,
                dataset_name=run_config.dataset.name,
            )
            for strategy in BASELINE_STRATEGIES
        ]
    except _CONFIG_ERRORS as exc:
        raise click.ClickException(str(exc))

    for baseline in baselines:
        click.echo(
            f"{baseline.strategy:<12} accuracy={baseline.accuracy:.4f} "
            f"cost=${format_usd(baseline.total_cost)}"
        )
    click.echo(
        f"{'cascade':<12} accuracy={cascade_report.accuracy:.4f} "
        f"cost=${format_usd(cascade_report.total_cost)} "
        f"strong_usage={cascade_report.strong_usage_fraction:.4f}"
    )
    click.echo(
        f"{'strong-only':<12} accuracy={reference.accuracy:.4f} "
        f"cost=${format_usd(reference.total_cost)}"
    )
    if reference.accuracy > 0 and reference.total_cost > 0:
        click.echo(
            f"relative performance: "
            f"{relative_performance(cascade_report.accuracy, reference.accuracy):.2f}%  "
            f"relative cost: "
            f"{relative_cost(cascade_report.total_cost, reference.total_cost):.2f}%"
        )
    if json_out:
        payload = {
            "cascade": cascade_report.to_dict(),
            "strong_only": reference.to_dict(),
            "baselines": [b.to_dict() for b in baselines],
        }
        with open(json_out, "w", encoding="utf-8") as sink:
            json.dump(payload, sink, sort_keys=True, indent=2, ensure_ascii=False)
            sink.write("\n")


if __name__ == "__main__":
    main()
