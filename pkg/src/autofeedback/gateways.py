"""Pluggable boundaries: LLM chat clients and API executors.

Each boundary has a real HTTP implementation (OpenAI-compatible chat wire
shape; JSON/query-string API calls) and a deterministic in-process double
so the whole pipeline can run and be tested offline.
"""

from __future__ import annotations

import json
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Literal, Mapping, Sequence

import requests

from .errors import ProtocolError, TransportError
from .request_codec import ApiRequest, Value, serialize_value

__all__ = [
    "Role",
    "ChatMessage",
    "LlmReply",
    "LlmClient",
    "ScriptedLlm",
    "scripted_llm",
    "HttpLlmClient",
    "http_llm_client",
    "ApiResponse",
    "ApiExecutor",
    "MockApiServer",
    "mock_api_server",
    "HttpApiExecutor",
    "http_api_executor",
    "whitespace_tokens",
]

Role = Literal["system", "user", "assistant"]

RETRY_ATTEMPTS = 3


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str


@dataclass(frozen=True)
class LlmReply:
    """One completion plus its token accounting."""

    text: str
    prompt_tokens: int
    completion_tokens: int


def whitespace_tokens(text: str) -> int:
    """Deterministic token-count proxy for clients that report no usage."""
    return len(text.split())


class LlmClient(ABC):
    """Chat-completion interface; implementations must be replayable when
    they claim determinism."""

    @abstractmethod
    def complete(self, messages: Sequence[ChatMessage]) -> LlmReply: ...


class ScriptedLlm(LlmClient):
    """Replays a fixed list of replies; the last one repeats forever.

    Every received prompt is recorded for assertions. One instance holds
    per-session state and must not be shared across concurrent sessions.
    """

    def __init__(self, script: Sequence[str]):
        if not script:
            raise ValueError("script must be non-empty")
        self._script = list(script)
        self.received_prompts: list[tuple[ChatMessage, ...]] = []

    @property
    def calls(self) -> int:
        return len(self.received_prompts)

    def complete(self, messages: Sequence[ChatMessage]) -> LlmReply:
        index = min(len(self.received_prompts), len(self._script) - 1)
        self.received_prompts.append(tuple(messages))
        reply = self._script[index]
        prompt_tokens = sum(whitespace_tokens(m.content) for m in messages)
        return LlmReply(reply, prompt_tokens, whitespace_tokens(reply))


def scripted_llm(script: Sequence[str]) -> ScriptedLlm:
    return ScriptedLlm(script)


def _post_with_retries(
    url: str,
    payload: dict,
    headers: dict[str, str],
    timeout: float,
    retry_base_delay: float,
) -> requests.Response:
    last_error: Exception | None = None
    for attempt in range(RETRY_ATTEMPTS):
        try:
            response = requests.post(url, json=payload, headers=headers, timeout=timeout)
            if response.status_code >= 500:
                last_error = TransportError(
                    f"server error {response.status_code} from {url}"
                )
            else:
                return response
        except requests.RequestException as exc:
            last_error = exc
        if attempt < RETRY_ATTEMPTS - 1:
            time.sleep(retry_base_delay * (2**attempt))
    raise TransportError(f"{url} unreachable after {RETRY_ATTEMPTS} attempts") from last_error


class HttpLlmClient(LlmClient):
    """OpenAI-compatible chat-completions client.

    Sends ``{"model": ..., "messages": [{"role", "content"}]}`` and reads
    ``choices[0].message.content``. Token counts come from ``usage`` when
    present, otherwise from whitespace token counts.
    """

    def __init__(
        self,
        base_url: str,
        model_name: str,
        api_key: str = "",
        timeout: float = 60.0,
        retry_base_delay: float = 1.0,
    ):
        self._url = base_url.rstrip("/") + "/chat/completions"
        self._model_name = model_name
        self._api_key = api_key
        self._timeout = timeout
        self._retry_base_delay = retry_base_delay

    def complete(self, messages: Sequence[ChatMessage]) -> LlmReply:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        payload = {
            "model": self._model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        response = _post_with_retries(
            self._url, payload, headers, self._timeout, self._retry_base_delay
        )
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}") from exc
        usage = body.get("usage") or {}
        prompt_tokens = usage.get(
            "prompt_tokens", sum(whitespace_tokens(m.content) for m in messages)
        )
        completion_tokens = usage.get("completion_tokens", whitespace_tokens(text))
        return LlmReply(str(text), int(prompt_tokens), int(completion_tokens))


def http_llm_client(
    base_url: str, model_name: str, api_key: str = "", **kwargs
) -> HttpLlmClient:
    return HttpLlmClient(base_url, model_name, api_key, **kwargs)


@dataclass(frozen=True)
class ApiResponse:
    """Raw result of executing a request; the body is kept byte-exact
    because retrieval queries and logs embed it verbatim."""

    status: int
    body: str

    @property
    def not_found(self) -> bool:
        return self.status == 404


class ApiExecutor(ABC):
    """Executes parsed requests. Implementations never raise on an unknown
    API name; they answer with a not-found response instead."""

    @abstractmethod
    def execute(self, req: ApiRequest) -> ApiResponse: ...


Handler = Callable[[dict[str, Value]], ApiResponse]


class MockApiServer(ApiExecutor):
    """In-process executor dispatching on the request name.

    Handlers receive the argument dict and may inspect values to simulate
    semantic failures. Unknown names get a 404 with body ``unknown api``.
    """

    def __init__(self, routes: Mapping[str, Handler]):
        self._routes = dict(routes)
        self.executed: list[ApiRequest] = []

    def execute(self, req: ApiRequest) -> ApiResponse:
        self.executed.append(req)
        handler = self._routes.get(req.name)
        if handler is None:
            return ApiResponse(404, "unknown api")
        return handler(dict(req.args))


def mock_api_server(routes: Mapping[str, Handler]) -> MockApiServer:
    return MockApiServer(routes)


def _wire_value(value: Value) -> str:
    """Render one argument for a query string: strings stay raw, the rest
    use the canonical literal form."""
    if isinstance(value, str):
        return value
    return serialize_value(value)


def _json_safe(value: Value):
    if isinstance(value, tuple):
        return [_json_safe(v) for v in value]
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    return value


class HttpApiExecutor(ApiExecutor):
    """Executes requests against real HTTP endpoints.

    ``route_map`` maps each API name to ``(method, path_template)``; path
    templates may reference arguments as ``{name}``, which are substituted
    and removed from the payload. GET sends remaining arguments as query
    parameters, other methods as a JSON body.
    """

    def __init__(
        self,
        base_url: str,
        route_map: Mapping[str, tuple[str, str]],
        timeout: float = 30.0,
        retry_base_delay: float = 1.0,
    ):
        self._base_url = base_url.rstrip("/")
        self._route_map = dict(route_map)
        self._timeout = timeout
        self._retry_base_delay = retry_base_delay

    def execute(self, req: ApiRequest) -> ApiResponse:
        route = self._route_map.get(req.name)
        if route is None:
            return ApiResponse(404, "unknown api")
        method, template = route
        args = dict(req.args)
        path = template
        for key in list(args):
            placeholder = "{" + key + "}"
            if placeholder in path:
                path = path.replace(placeholder, _wire_value(args.pop(key)))
        url = self._base_url + path
        last_error: Exception | None = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                if method.upper() == "GET":
                    response = requests.get(
                        url,
                        params={k: _wire_value(v) for k, v in args.items()},
                        timeout=self._timeout,
                    )
                else:
                    response = requests.request(
                        method.upper(),
                        url,
                        data=json.dumps({k: _json_safe(v) for k, v in args.items()}),
                        headers={"Content-Type": "application/json"},
                        timeout=self._timeout,
                    )
                return ApiResponse(response.status_code, response.text)
            except requests.RequestException as exc:
                last_error = exc
                if attempt < RETRY_ATTEMPTS - 1:
                    time.sleep(self._retry_base_delay * (2**attempt))
        raise TransportError(
            f"{url} unreachable after {RETRY_ATTEMPTS} attempts"
        ) from last_error


def http_api_executor(
    base_url: str, route_map: Mapping[str, tuple[str, str]], **kwargs
) -> HttpApiExecutor:
    return HttpApiExecutor(base_url, route_map, **kwargs)
