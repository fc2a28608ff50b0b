"""Dynamic feedback: execute the request, judge the response, retrieve the
matching error details from documentation, and ask the LLM for a corrected
request with the full record history in a Thought/Action/Observation prompt.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ExecutorUnavailableError, TransportError
from .gateways import ApiExecutor, ApiResponse, ChatMessage, LlmClient
from .request_codec import (
    ApiRequest,
    extract_request_block,
    parse_request,
    serialize_request,
)
from .retrieval import ChunkIndex, RetrievedMessage, SimilarityModel, retrieve_error_message

__all__ = [
    "ApiResponse",
    "FeedbackRecord",
    "DynamicOutcome",
    "RequirementJudge",
    "ExactMatchJudge",
    "LlmJudge",
    "run_dynamic_loop",
    "assemble_react_prompt",
]


@dataclass(frozen=True)
class FeedbackRecord:
    """One loop iteration: what was sent, what came back, what the LLM
    thought, and what it sent next."""

    iteration: int
    action: ApiRequest
    response: ApiResponse
    error_message: RetrievedMessage | None
    thought: str
    new_action: ApiRequest


@dataclass(frozen=True)
class DynamicOutcome:
    final_response: ApiResponse
    records: tuple[FeedbackRecord, ...]
    satisfied: bool


class RequirementJudge(ABC):
    """Decides whether an API response satisfies the user's task."""

    @abstractmethod
    def accepts(self, request: ApiRequest, response: ApiResponse) -> bool: ...


class ExactMatchJudge(RequirementJudge):
    """Accepts when the status is in the success set and, if ground truth
    is known, the request matches it canonically."""

    def __init__(
        self,
        success_statuses: frozenset[int] = frozenset({200}),
        ground_truth: ApiRequest | None = None,
    ):
        self._success_statuses = success_statuses
        self._truth = (
            serialize_request(ground_truth) if ground_truth is not None else None
        )

    def accepts(self, request: ApiRequest, response: ApiResponse) -> bool:
        if response.status not in self._success_statuses:
            return False
        if self._truth is None:
            return True
        return serialize_request(request) == self._truth


_JUDGE_PROMPT = """\
A user asked: {instruction}

The assistant called the API request below and received the response below.

Request: {request}
Response (status {status}): {body}

Does this response satisfy the user's need? Answer with exactly one word,
"yes" or "no"."""


class LlmJudge(RequirementJudge):
    """Delegates acceptance to an LLM playing the user's role."""

    def __init__(self, llm: LlmClient, instruction: str):
        self._llm = llm
        self._instruction = instruction

    def accepts(self, request: ApiRequest, response: ApiResponse) -> bool:
        prompt = _JUDGE_PROMPT.format(
            instruction=self._instruction,
            request=serialize_request(request),
            status=response.status,
            body=response.body,
        )
        reply = self._llm.complete([ChatMessage("user", prompt)])
        return reply.text.strip().lower().startswith("yes")


def _observation_line(response: ApiResponse, message: RetrievedMessage | None) -> str:
    error_text = message.text if message is not None else "none"
    return f"Observation: status={response.status} body={response.body} error_message={error_text}"


_REACT_INSTRUCTIONS = (
    'Respond with a line starting with "Thought:" that explains the'
    " correction, then the corrected API request between <<API>> and <</API>>."
)


def assemble_react_prompt(
    history: Sequence[FeedbackRecord],
    action: ApiRequest,
    observation: tuple[ApiResponse, RetrievedMessage | None],
) -> str:
    """Render past records and the current turn as Action/Observation lines."""
    lines: list[str] = []
    for record in history:
        lines.append(f"Action: {serialize_request(record.action)}")
        lines.append(_observation_line(record.response, record.error_message))
        lines.append(f"Thought: {record.thought}")
    response, message = observation
    lines.append(f"Action: {serialize_request(action)}")
    lines.append(_observation_line(response, message))
    lines.append(_REACT_INSTRUCTIONS)
    return "\n".join(lines)


def _split_thought(reply_text: str) -> str:
    """Pull the thought out of a reply; falls back to the text before the
    request block."""
    for line in reply_text.splitlines():
        stripped = line.strip()
        if stripped.lower().startswith("thought:"):
            return stripped[len("thought:") :].strip()
    head = reply_text.split("<<API>>", 1)[0].strip()
    return head


_REASK_MESSAGE = (
    "Your previous reply did not contain a parseable API request. "
    + _REACT_INSTRUCTIONS
)


def _ask_for_correction(
    llm: LlmClient, prompt: str, system_preamble: str | None
) -> tuple[ApiRequest | None, str, str]:
    """One LLM exchange with a single re-ask on unparseable output.

    Returns (request or None, thought, raw reply text).
    """
    messages: list[ChatMessage] = []
    if system_preamble is not None:
        messages.append(ChatMessage("system", system_preamble))
    messages.append(ChatMessage("user", prompt))
    reply = llm.complete(messages)
    block = extract_request_block(reply.text)
    outcome = parse_request(block) if block is not None else None
    if outcome is not None and outcome.ok:
        return outcome.request, _split_thought(reply.text), reply.text
    messages.append(ChatMessage("assistant", reply.text))
    messages.append(ChatMessage("user", _REASK_MESSAGE))
    retry = llm.complete(messages)
    block = extract_request_block(retry.text)
    outcome = parse_request(block) if block is not None else None
    if outcome is not None and outcome.ok:
        return outcome.request, _split_thought(retry.text), retry.text
    return None, _split_thought(reply.text), reply.text


def run_dynamic_loop(
    request: ApiRequest,
    doc,
    index: ChunkIndex,
    executor: ApiExecutor,
    llm: LlmClient,
    judge: RequirementJudge,
    model: SimilarityModel,
    n_max: int,
    *,
    system_preamble: str | None = None,
    static_check: Callable[[ApiRequest], bool] | None = None,
    record_sink: list[FeedbackRecord] | None = None,
) -> DynamicOutcome:
    """Execute-and-correct loop bounded by *n_max* iterations.

    Per iteration: retrieve the documentation text closest to the request
    plus response body, prompt the LLM with the full history, adopt its
    corrected request, and re-execute. An unparseable correction is re-asked
    once; a correction that is still unparseable (or fails *static_check*)
    burns the iteration and resends the previous request. With ``n_max=0``
    the request is executed exactly once and no LLM call happens.

    *record_sink*, when given, receives each record as it completes, so a
    transport failure mid-loop still leaves the earlier records with the
    caller.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")

    def _execute(req: ApiRequest) -> ApiResponse:
        try:
            return executor.execute(req)
        except TransportError as exc:
            raise ExecutorUnavailableError(str(exc)) from exc

    response = _execute(request)
    satisfied = judge.accepts(request, response)
    records: list[FeedbackRecord] = record_sink if record_sink is not None else []
    while not satisfied and len(records) < n_max:
        query = f"{serialize_request(request)}\n{response.body}"
        message = retrieve_error_message(request.name, query, index, model)
        prompt = assemble_react_prompt(records, request, (response, message))
        new_request, thought, _ = _ask_for_correction(llm, prompt, system_preamble)
        if new_request is not None and static_check is not None:
            if not static_check(new_request):
                new_request = None
        if new_request is None:
            new_request = request  # failed iteration: resend the old request
        records.append(
            FeedbackRecord(
                iteration=len(records),
                action=request,
                response=response,
                error_message=message,
                thought=thought,
                new_action=new_request,
            )
        )
        request = new_request
        response = _execute(request)
        satisfied = judge.accepts(request, response)
    return DynamicOutcome(response, tuple(records), satisfied)
