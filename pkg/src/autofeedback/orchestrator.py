"""The full pipeline: initial generation, bounded static feedback loop,
dispatch to the dynamic loop, and session logging for human collaboration.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from .doc_model import ApiDocument
from .dynamic_analyzer import (
    DynamicOutcome,
    ExactMatchJudge,
    FeedbackRecord,
    RequirementJudge,
    run_dynamic_loop,
)
from .errors import AutoFeedbackError, EmptyDatasetError
from .gateways import (
    ApiExecutor,
    ApiResponse,
    ChatMessage,
    LlmClient,
    LlmReply,
    MockApiServer,
    ScriptedLlm,
)
from .metrics import (
    BenchmarkReport,
    accuracy,
    error_distribution,
    overhead,
    process_correctness,
)
from .request_codec import (
    ApiRequest,
    ParseFailure,
    ParseOutcome,
    extract_request_block,
    parse_request,
    serialize_request,
)
from .retrieval import SimilarityModel, build_chunk_index, default_similarity
from .static_scanner import DetectionFinding, ErrorType, detect, render_feedback

__all__ = [
    "PipelineConfig",
    "StaticEvent",
    "SessionLog",
    "TaskResult",
    "run_task",
    "render_doc_prompt",
    "parse_llm_output",
    "echo_executor",
    "BenchTask",
    "run_benchmark",
    "executed_sequence",
    "session_log_lines",
    "write_session_log",
    "write_summary",
    "SYSTEM_PREAMBLE",
]


@dataclass(frozen=True)
class PipelineConfig:
    """Loop budgets and detection knobs with their default settings."""

    k: int = 1
    threshold: float = 0.5
    max_static: int = 3
    max_dynamic: int = 2
    chunk_threshold: float = 0.3
    int_widens_to_float: bool = True
    tuple_as_list: bool = False

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if not 0.0 < self.chunk_threshold < 1.0:
            raise ValueError("chunk_threshold must be in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_static < 0 or self.max_dynamic < 0:
            raise ValueError("budgets must be >= 0")


@dataclass
class StaticEvent:
    """One generation attempt in the static loop."""

    iteration: int
    llm_output_raw: str
    finding: DetectionFinding
    feedback_text: str | None = None


@dataclass
class SessionLog:
    """Everything one task session produced, append-only while running."""

    task_id: str
    static_events: list[StaticEvent] = field(default_factory=list)
    dynamic_records: list[FeedbackRecord] = field(default_factory=list)
    final_request: ApiRequest | None = None
    final_response: ApiResponse | None = None
    satisfied: bool = False
    token_totals: tuple[int, int] = (0, 0)


@dataclass
class TaskResult:
    satisfied: bool
    request: ApiRequest | None
    response: ApiResponse | None
    log: SessionLog
    total_llm_calls: int
    error: str | None = None


class _CountingLlm(LlmClient):
    """Wraps a client to accumulate call and token totals for one session."""

    def __init__(self, inner: LlmClient):
        self._inner = inner
        self.calls = 0
        self.prompt_tokens = 0
        self.completion_tokens = 0

    def complete(self, messages: Sequence[ChatMessage]) -> LlmReply:
        reply = self._inner.complete(messages)
        self.calls += 1
        self.prompt_tokens += reply.prompt_tokens
        self.completion_tokens += reply.completion_tokens
        return reply


SYSTEM_PREAMBLE = (
    "You complete the user's task by calling exactly one API from the"
    " documentation below. Reply with the API request in the format"
    " APINAME(key1=value1, key2=value2) between <<API>> and <</API>>."
)

_GENERATE_INSTRUCTION = (
    "Generate the API request between <<API>> and <</API>>."
)


def render_doc_prompt(doc: ApiDocument) -> str:
    """Deterministic textual rendering of the documentation, in doc order."""
    blocks: list[str] = []
    for api in doc.apis:
        lines = [f"API: {api.name}", f"Description: {api.description}"]
        if api.params:
            lines.append("Parameters:")
            for p in api.params:
                presence = "required" if p.required else "optional"
                lines.append(
                    f"  {p.name} ({p.value_type.value}, {presence}): {p.description}"
                )
        if api.exceptions:
            lines.append("Exceptions:")
            for code, message in api.exceptions:
                lines.append(f"  {code}: {message}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def parse_llm_output(text: str) -> ParseOutcome:
    """Extract and parse the request block; failures keep the whole raw
    output so the session log can show what the model actually said."""
    block = extract_request_block(text)
    if block is None:
        return ParseOutcome.unparseable(ParseFailure.NO_BLOCK, text)
    outcome = parse_request(block)
    if outcome.ok:
        return outcome
    return ParseOutcome.unparseable(outcome.failure, text)


def run_task(
    instruction: str,
    doc: ApiDocument,
    llm: LlmClient,
    executor: ApiExecutor,
    judge: RequirementJudge,
    model: SimilarityModel,
    config: PipelineConfig = PipelineConfig(),
    *,
    task_id: str = "task",
) -> TaskResult:
    """Run one task through the static loop and then the dynamic loop.

    The static loop re-scans after every regeneration and never contacts
    the executor; a request that exhausts the static budget with an error
    is not executed. Feedback is appended to the conversation, so each
    regeneration sees the history of its own mistakes.
    """
    counting = _CountingLlm(llm)
    log = SessionLog(task_id=task_id)

    def _detect(outcome: ParseOutcome) -> DetectionFinding:
        return detect(
            outcome,
            instruction,
            doc,
            model,
            config.k,
            config.threshold,
            int_widens_to_float=config.int_widens_to_float,
            tuple_as_list=config.tuple_as_list,
        )

    def _finish(
        satisfied: bool,
        request: ApiRequest | None,
        response: ApiResponse | None,
        error: str | None = None,
    ) -> TaskResult:
        log.final_request = request
        log.final_response = response
        log.satisfied = satisfied
        log.token_totals = (counting.prompt_tokens, counting.completion_tokens)
        return TaskResult(satisfied, request, response, log, counting.calls, error)

    system = ChatMessage("system", SYSTEM_PREAMBLE + "\n\n" + render_doc_prompt(doc))
    messages: list[ChatMessage] = [
        system,
        ChatMessage("user", f"{instruction}\n\n{_GENERATE_INSTRUCTION}"),
    ]

    request: ApiRequest | None = None
    try:
        for attempt in range(config.max_static + 1):
            reply = counting.complete(messages)
            messages.append(ChatMessage("assistant", reply.text))
            outcome = parse_llm_output(reply.text)
            finding = _detect(outcome)
            event = StaticEvent(attempt, reply.text, finding)
            log.static_events.append(event)
            if finding.error_type is ErrorType.NONE:
                request = outcome.request
                break
            if attempt == config.max_static:
                return _finish(False, outcome.request, None)
            feedback = render_feedback(finding, doc)
            event.feedback_text = feedback.text
            messages.append(ChatMessage("user", feedback.text))
        assert request is not None

        index = build_chunk_index(doc, model, config.chunk_threshold)
        outcome_dyn: DynamicOutcome = run_dynamic_loop(
            request,
            doc,
            index,
            executor,
            counting,
            judge,
            model,
            config.max_dynamic,
            system_preamble=system.content,
            static_check=lambda req: _detect(ParseOutcome.parsed(req)).error_type
            is ErrorType.NONE,
        )
        log.dynamic_records.extend(outcome_dyn.records)
        final_request = (
            outcome_dyn.records[-1].new_action if outcome_dyn.records else request
        )
        return _finish(outcome_dyn.satisfied, final_request, outcome_dyn.final_response)
    except AutoFeedbackError as exc:
        return _finish(False, request, None, error=str(exc))


def executed_sequence(log: SessionLog) -> list[str]:
    """Canonical serializations of every request actually executed."""
    if log.dynamic_records:
        first = log.dynamic_records[0].action
        rest = [r.new_action for r in log.dynamic_records]
        return [serialize_request(r) for r in [first, *rest]]
    if log.final_request is not None and log.final_response is not None:
        return [serialize_request(log.final_request)]
    return []


@dataclass(frozen=True)
class BenchTask:
    """One dataset sample: instruction, optional truth, and its document."""

    task_id: str
    instruction: str
    doc: ApiDocument
    ground_truth: str | tuple[str, ...] | None = None
    script: tuple[str, ...] | None = None

    @property
    def truth_sequence(self) -> tuple[str, ...] | None:
        if self.ground_truth is None:
            return None
        if isinstance(self.ground_truth, str):
            return (self.ground_truth,)
        return self.ground_truth


def echo_executor(doc: ApiDocument) -> MockApiServer:
    """Success-echo double: known APIs answer 200 with the argument dict."""

    def _handler_for(name: str):
        def handler(args):
            return ApiResponse(200, json.dumps({"api": name, "args": str(args)}))

        return handler

    return MockApiServer({api.name: _handler_for(api.name) for api in doc.apis})


def _default_llm(task: BenchTask) -> LlmClient:
    if task.script:
        return ScriptedLlm(list(task.script))
    if task.truth_sequence:
        return ScriptedLlm([f"<<API>>{t}<</API>>" for t in task.truth_sequence])
    return ScriptedLlm(["I cannot call any API."])


def _default_judge(task: BenchTask) -> RequirementJudge:
    truth = task.truth_sequence
    if truth:
        outcome = parse_request(truth[0])
        if outcome.ok:
            return ExactMatchJudge(ground_truth=outcome.request)
    return ExactMatchJudge()


def _canonical_truth(task: BenchTask) -> tuple[str, ...] | None:
    truth = task.truth_sequence
    if truth is None:
        return None
    canonical = []
    for text in truth:
        outcome = parse_request(text)
        canonical.append(
            serialize_request(outcome.request) if outcome.ok else text
        )
    return tuple(canonical)


def run_benchmark(
    tasks: Sequence[BenchTask],
    config: PipelineConfig = PipelineConfig(),
    *,
    llm_factory: Callable[[BenchTask], LlmClient] | None = None,
    executor_factory: Callable[[BenchTask], ApiExecutor] | None = None,
    judge_factory: Callable[[BenchTask], RequirementJudge] | None = None,
    model_factory: Callable[[ApiDocument], SimilarityModel] | None = None,
    log_dir: str | Path | None = None,
    jobs: int = 1,
    clock: Callable[[], str] | None = None,
) -> tuple[BenchmarkReport, list[TaskResult]]:
    """Run every task and aggregate a report.

    A task that raises is recorded as unsatisfied with the error noted,
    never aborting the batch. Logs are written through a single writer in
    task order, so reruns with deterministic gateways are byte-identical
    apart from timestamps.
    """
    if not tasks:
        raise EmptyDatasetError("no tasks to run")
    llm_factory = llm_factory or _default_llm
    executor_factory = executor_factory or (lambda task: echo_executor(task.doc))
    judge_factory = judge_factory or _default_judge
    model_factory = model_factory or default_similarity

    models: dict[int, SimilarityModel] = {}

    def _model_for(doc: ApiDocument) -> SimilarityModel:
        key = id(doc)
        if key not in models:
            models[key] = model_factory(doc)
        return models[key]

    def _run_one(task: BenchTask) -> TaskResult:
        try:
            return run_task(
                task.instruction,
                task.doc,
                llm_factory(task),
                executor_factory(task),
                judge_factory(task),
                _model_for(task.doc),
                config,
                task_id=task.task_id,
            )
        except Exception as exc:  # noqa: BLE001 - batch must survive task faults
            log = SessionLog(task_id=task.task_id)
            return TaskResult(False, None, None, log, 0, error=str(exc))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(task) for task in tasks]

    acc = accuracy(results)
    token_sums = [sum(r.log.token_totals) for r in results]
    mean_tokens = sum(token_sums) / len(token_sums)
    classifications = [
        e.finding.error_type for r in results for e in r.log.static_events
    ]
    truths = [_canonical_truth(t) for t in tasks]
    if all(t is not None for t in truths):
        process_pct = process_correctness(
            [executed_sequence(r.log) for r in results], truths
        )
    else:
        process_pct = None
    report = BenchmarkReport(
        n_tasks=len(tasks),
        accuracy_pct=acc,
        process_correctness_pct=process_pct,
        mean_tokens=mean_tokens,
        overhead=overhead(mean_tokens, acc) if acc > 0 else None,
        error_histogram=error_distribution(classifications),
    )

    if log_dir is not None:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)
        for result in results:
            write_session_log(
                result.log, log_path / f"{result.log.task_id}.jsonl", clock=clock
            )
        write_summary(results, log_path / "summary.json")
        (log_path / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return report, results


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def session_log_lines(
    log: SessionLog, clock: Callable[[], str] | None = None
) -> list[str]:
    """Serialize one session as JSONL event lines (static then dynamic)."""
    now = clock or _utc_now
    lines: list[str] = []
    for event in log.static_events:
        finding = event.finding
        outcome_request = parse_llm_output(event.llm_output_raw)
        action = (
            serialize_request(outcome_request.request)
            if outcome_request.ok
            else event.llm_output_raw
        )
        lines.append(
            json.dumps(
                {
                    "task_id": log.task_id,
                    "phase": "static",
                    "iteration": event.iteration,
                    "action": action,
                    "observation": None,
                    "thought": None,
                    "error_type": (
                        finding.error_type.value
                        if finding.error_type is not ErrorType.NONE
                        else None
                    ),
                    "feedback": event.feedback_text,
                    "new_action": None,
                    "ts": now(),
                },
                ensure_ascii=False,
            )
        )
    for record in log.dynamic_records:
        lines.append(
            json.dumps(
                {
                    "task_id": log.task_id,
                    "phase": "dynamic",
                    "iteration": record.iteration,
                    "action": serialize_request(record.action),
                    "observation": {
                        "status": record.response.status,
                        "body": record.response.body,
                        "error_message": (
                            record.error_message.text
                            if record.error_message is not None
                            else None
                        ),
                    },
                    "thought": record.thought,
                    "error_type": None,
                    "feedback": None,
                    "new_action": serialize_request(record.new_action),
                    "ts": now(),
                },
                ensure_ascii=False,
            )
        )
    return lines


def write_session_log(
    log: SessionLog, path: str | Path, clock: Callable[[], str] | None = None
) -> None:
    lines = session_log_lines(log, clock)
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_summary(results: Sequence[TaskResult], path: str | Path) -> None:
    """Per-task verdicts consumed by the report command."""
    payload = {
        "tasks": [
            {
                "task_id": r.log.task_id,
                "satisfied": r.satisfied,
                "llm_calls": r.total_llm_calls,
                "prompt_tokens": r.log.token_totals[0],
                "completion_tokens": r.log.token_totals[1],
                "error": r.error,
            }
            for r in results
        ]
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
