"""Command-line entry point.

Commands: ``run`` one task, ``bench`` a dataset, ``classify`` generated
requests against ground truth, ``report`` digest session logs. Every flag
has a config-file equivalent (one flat JSON object mirroring flag names);
a flag beats the file, the file beats the default.

Exit codes: 0 ok/satisfied, 1 unsatisfied, 2 configuration error,
3 transport error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .doc_model import ApiDocument, load_document
from .dynamic_analyzer import ExactMatchJudge
from .errors import AutoFeedbackError, SchemaError, TransportError
from .gateways import ChatMessage, HttpApiExecutor, HttpLlmClient, ScriptedLlm
from .metrics import error_distribution, error_distribution_percentages
from .orchestrator import (
    SYSTEM_PREAMBLE,
    BenchTask,
    PipelineConfig,
    echo_executor,
    parse_llm_output,
    render_doc_prompt,
    run_benchmark,
    run_task,
    write_session_log,
    write_summary,
)
from .request_codec import parse_request, serialize_request
from .retrieval import RemoteEmbeddingSimilarity, default_similarity
from .static_scanner import ErrorType, classify_against_truth

API_KEY_ENV = "AUTOFEEDBACK_LLM_KEY"
EMBED_KEY_ENV = "AUTOFEEDBACK_EMBED_KEY"

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3


class ConfigError(Exception):
    pass


_FLAG_DEFAULTS = {
    "doc": None,
    "dataset": None,
    "llm": "scripted",
    "llm_base_url": None,
    "model": "default",
    "executor": "mock",
    "executor_base_url": None,
    "embedder_base_url": None,
    "embedder_model": "default",
    "max_static": 3,
    "max_dynamic": 2,
    "k": 1,
    "threshold": 0.5,
    "chunk_threshold": 0.3,
    "jobs": 1,
    "log_dir": "logs",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autofeedback",
        description="Feedback-driven API request generation pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="flat JSON config file mirroring flag names")
        p.add_argument("--doc", help="API documentation JSON file")
        p.add_argument("--llm", choices=["scripted", "http"])
        p.add_argument("--llm-base-url", dest="llm_base_url")
        p.add_argument("--model", help="model name for the http LLM")
        p.add_argument("--executor", choices=["mock", "http"])
        p.add_argument("--executor-base-url", dest="executor_base_url")
        p.add_argument("--embedder-base-url", dest="embedder_base_url",
                       help="remote embedding service; default is local TF-IDF")
        p.add_argument("--embedder-model", dest="embedder_model")
        p.add_argument("--max-static", dest="max_static", type=int)
        p.add_argument("--max-dynamic", dest="max_dynamic", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--threshold", type=float)
        p.add_argument("--chunk-threshold", dest="chunk_threshold", type=float)
        p.add_argument("--jobs", type=int)
        p.add_argument("--log-dir", dest="log_dir")

    run_p = sub.add_parser("run", help="run one task")
    run_p.add_argument("instruction")
    run_p.add_argument("--script", action="append", default=None,
                       help="scripted LLM reply (repeatable)")
    run_p.add_argument("--script-file", help="JSON list of scripted replies")
    run_p.add_argument("--ground-truth", dest="ground_truth",
                       help="expected request for the exact-match judge")
    run_p.add_argument("--task-id", dest="task_id", default="task")
    add_common(run_p)

    bench_p = sub.add_parser("bench", help="run a JSONL dataset")
    bench_p.add_argument("--dataset")
    add_common(bench_p)

    classify_p = sub.add_parser("classify", help="label outputs against ground truth")
    classify_p.add_argument("--dataset")
    classify_p.add_argument("--out", help="write histogram JSON here")
    add_common(classify_p)

    report_p = sub.add_parser("report", help="digest session logs")
    add_common(report_p)

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """flag > config file > default."""
    values = dict(_FLAG_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path} must hold one JSON object")
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key not in values:
                raise ConfigError(f"unknown config key {key!r} in {config_path}")
            values[key] = value
    for key in values:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    return values


def _pipeline_config(values: dict) -> PipelineConfig:
    try:
        return PipelineConfig(
            k=int(values["k"]),
            threshold=float(values["threshold"]),
            max_static=int(values["max_static"]),
            max_dynamic=int(values["max_dynamic"]),
            chunk_threshold=float(values["chunk_threshold"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid pipeline settings: {exc}") from exc


def _load_doc(values: dict) -> ApiDocument:
    path = values.get("doc")
    if not path:
        raise ConfigError("--doc is required")
    if not Path(path).exists():
        raise ConfigError(f"documentation file not found: {path}")
    try:
        return load_document(Path(path))
    except SchemaError as exc:
        raise ConfigError(f"bad documentation file {path}: {exc}") from exc


def _similarity_factory(values: dict):
    base_url = values.get("embedder_base_url")
    if not base_url:
        return default_similarity
    key = os.environ.get(EMBED_KEY_ENV) or os.environ.get(API_KEY_ENV, "")
    shared = RemoteEmbeddingSimilarity(
        base_url, values.get("embedder_model") or "default", key
    )
    return lambda doc: shared


def _http_llm(values: dict) -> HttpLlmClient:
    base_url = values.get("llm_base_url")
    if not base_url:
        raise ConfigError("--llm http requires --llm-base-url")
    key = os.environ.get(API_KEY_ENV, "")
    if not key:
        raise ConfigError(f"--llm http requires the {API_KEY_ENV} environment variable")
    return HttpLlmClient(base_url, values.get("model") or "default", key)


def _executor_for(values: dict, task: BenchTask):
    if values["executor"] == "http":
        base_url = values.get("executor_base_url")
        if not base_url:
            raise ConfigError("--executor http requires --executor-base-url")
        route_map = {
            api.name: ("POST", f"/{api.name}") for api in task.doc.apis
        }
        return HttpApiExecutor(base_url, route_map)
    return echo_executor(task.doc)


def _load_dataset(values: dict, base_doc: ApiDocument | None) -> list[BenchTask]:
    path = values.get("dataset")
    if not path:
        raise ConfigError("--dataset is required")
    dataset_path = Path(path)
    if not dataset_path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    docs_cache: dict[str, ApiDocument] = {}
    tasks: list[BenchTask] = []
    for line_no, line in enumerate(
        dataset_path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            task_id = str(raw["id"])
            instruction = str(raw["instruction"])
            ground_truth = raw.get("ground_truth")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"malformed dataset line {line_no}: {exc}") from exc
        doc_ref = raw.get("doc")
        if doc_ref:
            doc_path = Path(doc_ref)
            if not doc_path.is_absolute():
                doc_path = dataset_path.parent / doc_path
            key = str(doc_path)
            if key not in docs_cache:
                try:
                    docs_cache[key] = load_document(doc_path)
                except (OSError, SchemaError) as exc:
                    raise ConfigError(
                        f"dataset line {line_no}: cannot load doc {doc_ref}: {exc}"
                    ) from exc
            doc = docs_cache[key]
        elif base_doc is not None:
            doc = base_doc
        else:
            raise ConfigError(f"dataset line {line_no}: no doc given and no --doc")
        if isinstance(ground_truth, list):
            ground_truth = tuple(str(t) for t in ground_truth)
        elif ground_truth is not None:
            ground_truth = str(ground_truth)
        script = raw.get("script")
        if script is not None:
            script = tuple(str(s) for s in script)
        tasks.append(BenchTask(task_id, instruction, doc, ground_truth, script))
    if not tasks:
        raise ConfigError(f"dataset {path} holds no tasks")
    return tasks


def _cmd_run(args: argparse.Namespace) -> int:
    values = _merge_config(args)
    config = _pipeline_config(values)
    doc = _load_doc(values)
    model = _similarity_factory(values)(doc)

    script = list(args.script or [])
    if args.script_file:
        try:
            script.extend(json.loads(Path(args.script_file).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read script file: {exc}") from exc
    if values["llm"] == "http":
        llm = _http_llm(values)
    else:
        if not script:
            raise ConfigError("scripted LLM needs --script or --script-file")
        llm = ScriptedLlm(script)

    truth_request = None
    if args.ground_truth:
        outcome = parse_request(args.ground_truth)
        if not outcome.ok:
            raise ConfigError(f"--ground-truth does not parse: {args.ground_truth!r}")
        truth_request = outcome.request
    judge = ExactMatchJudge(ground_truth=truth_request)

    task = BenchTask(args.task_id, args.instruction, doc)
    executor = _executor_for(values, task)
    result = run_task(
        args.instruction, doc, llm, executor, judge, model, config, task_id=args.task_id
    )

    log_dir = Path(values["log_dir"])
    log_dir.mkdir(parents=True, exist_ok=True)
    write_session_log(result.log, log_dir / f"{args.task_id}.jsonl")
    write_summary([result], log_dir / "summary.json")

    status = "satisfied" if result.satisfied else "unsatisfied"
    print(f"task {args.task_id}: {status}")
    print(f"  llm calls: {result.total_llm_calls}")
    print(f"  tokens: prompt={result.log.token_totals[0]}"
          f" completion={result.log.token_totals[1]}")
    if result.request is not None:
        print(f"  final request: {serialize_request(result.request)}")
    if result.response is not None:
        print(f"  final response: status={result.response.status}")
    print(f"  log: {log_dir / (args.task_id + '.jsonl')}")
    return EXIT_OK if result.satisfied else EXIT_UNSATISFIED


def _cmd_bench(args: argparse.Namespace) -> int:
    values = _merge_config(args)
    config = _pipeline_config(values)
    base_doc = _load_doc(values) if values.get("doc") else None
    tasks = _load_dataset(values, base_doc)

    llm_factory = None
    if values["llm"] == "http":
        client = _http_llm(values)
        llm_factory = lambda task: client  # noqa: E731 - shared stateless client

    report, _results = run_benchmark(
        tasks,
        config,
        llm_factory=llm_factory,
        executor_factory=lambda task: _executor_for(values, task),
        model_factory=_similarity_factory(values),
        log_dir=values["log_dir"],
        jobs=int(values["jobs"]),
    )
    print(report.to_table())
    print(f"report: {Path(values['log_dir']) / 'report.json'}")
    return EXIT_OK


def _cmd_classify(args: argparse.Namespace) -> int:
    values = _merge_config(args)
    base_doc = _load_doc(values) if values.get("doc") else None
    tasks = _load_dataset(values, base_doc)
    threshold = float(values["threshold"])
    similarity_factory = _similarity_factory(values)

    models: dict[int, object] = {}
    labels: list[ErrorType] = []
    for task in tasks:
        if not task.truth_sequence:
            raise ConfigError(f"dataset sample {task.task_id!r} has no ground truth")
        truth_outcome = parse_request(task.truth_sequence[0])
        if not truth_outcome.ok:
            raise ConfigError(
                f"dataset sample {task.task_id!r}: ground truth does not parse"
            )
        if task.script:
            generated_text = task.script[0]
        elif values["llm"] == "http":
            llm = _http_llm(values)
            reply = llm.complete(
                [
                    ChatMessage(
                        "system", SYSTEM_PREAMBLE + "\n\n" + render_doc_prompt(task.doc)
                    ),
                    ChatMessage("user", task.instruction),
                ]
            )
            generated_text = reply.text
        else:
            raise ConfigError(
                f"dataset sample {task.task_id!r} has no recorded output (script)"
                " and the LLM is scripted"
            )
        key = id(task.doc)
        if key not in models:
            models[key] = similarity_factory(task.doc)
        labels.append(
            classify_against_truth(
                parse_llm_output(generated_text),
                truth_outcome.request,
                task.doc,
                models[key],
                threshold,
            )
        )

    histogram = error_distribution(labels)
    percentages = error_distribution_percentages(histogram)
    payload = {
        "n_samples": len(labels),
        "counts": {t.value: c for t, c in sorted(histogram.items(), key=lambda i: i[0].value)},
        "percentages": {
            t.value: round(p, 2)
            for t, p in sorted(percentages.items(), key=lambda i: i[0].value)
        },
    }
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    values = _merge_config(args)
    log_dir = Path(values["log_dir"])
    if not log_dir.is_dir():
        print(f"no sessions under {log_dir}")
        return EXIT_OK

    summary_path = log_dir / "summary.json"
    verdicts: dict[str, bool] = {}
    if summary_path.exists():
        try:
            summary = json.loads(summary_path.read_text(encoding="utf-8"))
            for entry in summary.get("tasks", []):
                verdicts[str(entry.get("task_id"))] = bool(entry.get("satisfied"))
        except (json.JSONDecodeError, AttributeError):
            print(f"warning: unreadable summary {summary_path}", file=sys.stderr)

    sessions: dict[str, list[dict]] = {}
    for path in sorted(log_dir.glob("*.jsonl")):
        events = []
        for line_no, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                print(f"warning: skipping {path.name}:{line_no}", file=sys.stderr)
        if events:
            sessions[path.stem] = events
    if not sessions:
        print(f"no sessions under {log_dir}")
        return EXIT_OK

    def sort_key(task_id: str):
        # Unsatisfied sessions first: those are the ones a human must pick up.
        return (verdicts.get(task_id, False), task_id)

    for task_id in sorted(sessions, key=sort_key):
        verdict = verdicts.get(task_id)
        tag = {True: "satisfied", False: "UNSATISFIED", None: "unknown"}[verdict]
        print(f"== {task_id} [{tag}]")
        for event in sessions[task_id]:
            phase = event.get("phase", "?")
            iteration = event.get("iteration", "?")
            if phase == "static":
                error = event.get("error_type") or "clean"
                print(f"  static #{iteration}: {error}")
                if event.get("feedback"):
                    print(f"    feedback: {event['feedback']}")
            else:
                obs = event.get("observation") or {}
                print(
                    f"  dynamic #{iteration}: {event.get('action')}"
                    f" -> status={obs.get('status')}"
                )
                if obs.get("error_message"):
                    print(f"    retrieved: {obs['error_message']}")
                if event.get("thought"):
                    print(f"    thought: {event['thought']}")
                if event.get("new_action"):
                    print(f"    next: {event['new_action']}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "bench": _cmd_bench,
        "classify": _cmd_classify,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except AutoFeedbackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
