"""Extract and parse ``APINAME(key1=value1, ...)`` blocks from LLM output.

Requests carry keyword arguments only. Argument values are a small literal
language: quoted strings, integers, reals, ``true``/``false`` (any case),
``[...]`` lists, ``(...)`` tuples and ``{...}`` dicts with string keys.
Whitespace between tokens is insignificant.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .doc_model import ValueType

__all__ = [
    "Value",
    "ApiRequest",
    "ParseFailure",
    "ParseOutcome",
    "OPEN_MARKER",
    "CLOSE_MARKER",
    "extract_request_block",
    "parse_request",
    "serialize_request",
    "serialize_value",
    "infer_value_type",
    "type_matches",
    "values_equal",
]

logger = logging.getLogger(__name__)

# Literal value of one argument; containers nest to arbitrary depth.
Value = Union[str, int, float, bool, list, tuple, dict]

OPEN_MARKER = "<<API>>"
CLOSE_MARKER = "<</API>>"


@dataclass(frozen=True)
class ApiRequest:
    """A parsed API call: name plus ordered keyword arguments."""

    name: str
    args: tuple[tuple[str, Value], ...] = ()

    def __post_init__(self):
        keys = [k for k, _ in self.args]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate argument key")

    @property
    def arg_names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.args)

    def get(self, key: str) -> Value | None:
        for k, v in self.args:
            if k == key:
                return v
        return None


class ParseFailure(Enum):
    NO_BLOCK = "no_block"
    BAD_SYNTAX = "bad_syntax"
    DUPLICATE_KEY = "duplicate_key"


@dataclass(frozen=True)
class ParseOutcome:
    """Result of parsing: either a request or a failure with the raw text."""

    request: ApiRequest | None
    failure: ParseFailure | None = None
    raw_text: str = ""

    @property
    def ok(self) -> bool:
        return self.request is not None

    @classmethod
    def parsed(cls, request: ApiRequest) -> "ParseOutcome":
        return cls(request=request)

    @classmethod
    def unparseable(cls, failure: ParseFailure, raw_text: str) -> "ParseOutcome":
        return cls(request=None, failure=failure, raw_text=raw_text)


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
# Fallback extraction wants a call-shaped candidate: name directly against
# the open paren. (The parser itself tolerates whitespace between tokens.)
_CALL_START = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\(")
_NUMBER = re.compile(
    r"-?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)"
)


def _scan_balanced_call(text: str, start: int) -> str | None:
    """Return ``name(...)`` starting at *start* if the parens balance."""
    open_idx = text.index("(", start)
    depth = 1
    i = open_idx + 1
    quote: str | None = None
    while i < len(text):
        c = text[i]
        if quote is not None:
            if c == "\\":
                i += 2
                continue
            if c == quote:
                quote = None
        elif c in "'\"":
            quote = c
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
        i += 1
    return None


def extract_request_block(llm_output: str) -> str | None:
    """Pull the request text out of raw LLM output.

    Prefers the span between the ``<<API>>`` and ``<</API>>`` markers; when
    both markers are absent, falls back to the first ``identifier(...)``
    substring with balanced parentheses. Returns ``None`` when neither is
    found. Only the first block is taken; extras are logged and ignored.
    """
    close = llm_output.find(CLOSE_MARKER)
    if close != -1:
        open_idx = llm_output.rfind(OPEN_MARKER, 0, close)
        if open_idx != -1:
            rest = llm_output[close + len(CLOSE_MARKER) :]
            if OPEN_MARKER in rest and CLOSE_MARKER in rest:
                logger.debug("multiple request blocks found; keeping the first")
            return llm_output[open_idx + len(OPEN_MARKER) : close].strip()
    for m in _CALL_START.finditer(llm_output):
        candidate = _scan_balanced_call(llm_output, m.start())
        if candidate is not None:
            return candidate.strip()
    return None


class _SyntaxError(Exception):
    pass


class _DuplicateKey(Exception):
    pass


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'"}


class _Parser:
    """Recursive-descent parser for the request grammar."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _expect(self, char: str):
        if self._peek() != char:
            raise _SyntaxError(f"expected {char!r} at position {self.pos}")
        self.pos += 1

    def _identifier(self) -> str:
        m = _IDENT.match(self.text, self.pos)
        if not m:
            raise _SyntaxError(f"expected identifier at position {self.pos}")
        self.pos = m.end()
        return m.group()

    def _string(self) -> str:
        quote = self.text[self.pos]
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise _SyntaxError("unterminated string")
            c = self.text[self.pos]
            if c == "\\":
                if self.pos + 1 >= len(self.text):
                    raise _SyntaxError("dangling escape")
                nxt = self.text[self.pos + 1]
                out.append(_ESCAPES.get(nxt, nxt))
                self.pos += 2
                continue
            if c == quote:
                self.pos += 1
                return "".join(out)
            out.append(c)
            self.pos += 1

    def _number(self) -> int | float:
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            raise _SyntaxError(f"expected number at position {self.pos}")
        self.pos = m.end()
        token = m.group()
        if any(c in token for c in ".eE"):
            return float(token)
        return int(token)

    def _sequence(self, close: str) -> list:
        items: list = []
        self._ws()
        while self._peek() != close:
            items.append(self._value())
            self._ws()
            if self._peek() == ",":
                self.pos += 1
                self._ws()
            elif self._peek() != close:
                raise _SyntaxError(f"expected ',' or {close!r} at position {self.pos}")
        self.pos += 1
        return items

    def _dict(self) -> dict:
        out: dict = {}
        self._ws()
        while self._peek() != "}":
            if self._peek() not in "'\"":
                raise _SyntaxError(f"dict key must be a string at position {self.pos}")
            key = self._string()
            self._ws()
            self._expect(":")
            self._ws()
            out[key] = self._value()
            self._ws()
            if self._peek() == ",":
                self.pos += 1
                self._ws()
            elif self._peek() != "}":
                raise _SyntaxError(f"expected ',' or '}}' at position {self.pos}")
        self.pos += 1
        return out

    def _value(self) -> Value:
        self._ws()
        c = self._peek()
        if c in "'\"":
            return self._string()
        if c == "[":
            self.pos += 1
            return self._sequence("]")
        if c == "(":
            self.pos += 1
            return tuple(self._sequence(")"))
        if c == "{":
            self.pos += 1
            return self._dict()
        if c.isdigit() or c in "-.":
            return self._number()
        m = _IDENT.match(self.text, self.pos)
        if m:
            word = m.group().lower()
            if word == "true":
                self.pos = m.end()
                return True
            if word == "false":
                self.pos = m.end()
                return False
        raise _SyntaxError(f"expected a literal at position {self.pos}")

    def request(self) -> ApiRequest:
        self._ws()
        name = self._identifier()
        self._ws()
        self._expect("(")
        args: list[tuple[str, Value]] = []
        seen: set[str] = set()
        self._ws()
        while self._peek() != ")":
            key = self._identifier()
            self._ws()
            self._expect("=")
            value = self._value()
            if key in seen:
                raise _DuplicateKey(key)
            seen.add(key)
            args.append((key, value))
            self._ws()
            if self._peek() == ",":
                self.pos += 1
                self._ws()
            elif self._peek() != ")":
                raise _SyntaxError(f"expected ',' or ')' at position {self.pos}")
        self.pos += 1
        self._ws()
        if self.pos != len(self.text):
            raise _SyntaxError(f"trailing content at position {self.pos}")
        return ApiRequest(name, tuple(args))


def parse_request(block: str) -> ParseOutcome:
    """Parse one request block. Total: never raises on bad input."""
    try:
        return ParseOutcome.parsed(_Parser(block).request())
    except _DuplicateKey:
        return ParseOutcome.unparseable(ParseFailure.DUPLICATE_KEY, block)
    except _SyntaxError:
        return ParseOutcome.unparseable(ParseFailure.BAD_SYNTAX, block)


_STRING_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def _escape(text: str) -> str:
    return "".join(_STRING_ESCAPES.get(c, c) for c in text)


def serialize_value(value: Value) -> str:
    """Render one literal in canonical form (double quotes, lowercase bools)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{_escape(value)}"'
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(serialize_value(v) for v in value) + "]"
    if isinstance(value, tuple):
        if len(value) == 1:
            return f"({serialize_value(value[0])},)"
        return "(" + ", ".join(serialize_value(v) for v in value) + ")"
    if isinstance(value, dict):
        items = ", ".join(
            f'"{_escape(k)}": {serialize_value(v)}' for k, v in value.items()
        )
        return "{" + items + "}"
    raise TypeError(f"unsupported value type: {type(value).__name__}")


def serialize_request(req: ApiRequest) -> str:
    """Canonical one-line form; ``parse_request`` inverts it exactly."""
    args = ", ".join(f"{k}={serialize_value(v)}" for k, v in req.args)
    return f"{req.name}({args})"


def infer_value_type(value: Value) -> ValueType:
    """Map a parsed literal to its documentation type."""
    if isinstance(value, bool):
        return ValueType.BOOL
    if isinstance(value, str):
        return ValueType.STRING
    if isinstance(value, int):
        return ValueType.INT
    if isinstance(value, float):
        return ValueType.FLOAT
    if isinstance(value, list):
        return ValueType.LIST
    if isinstance(value, tuple):
        return ValueType.TUPLE
    if isinstance(value, dict):
        return ValueType.DICT
    raise TypeError(f"unsupported value type: {type(value).__name__}")


def type_matches(
    value: Value,
    expected: ValueType,
    *,
    int_widens_to_float: bool = True,
    tuple_as_list: bool = False,
) -> bool:
    """Check a literal against a documented parameter type.

    An integer satisfies a float parameter when *int_widens_to_float* is on;
    *tuple_as_list* collapses the list/tuple distinction both ways.
    """
    actual = infer_value_type(value)
    if actual == expected:
        return True
    if int_widens_to_float and actual == ValueType.INT and expected == ValueType.FLOAT:
        return True
    if tuple_as_list and {actual, expected} == {ValueType.LIST, ValueType.TUPLE}:
        return True
    return False


def values_equal(a: Value, b: Value, *, int_widens_to_float: bool = True) -> bool:
    """Type-aware equality: bools never equal ints, 3 == 3.0 only when widening."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if type(a) is type(b):
            return a == b
        return int_widens_to_float and float(a) == float(b)
    if type(a) is not type(b):
        return False
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(
            values_equal(x, y, int_widens_to_float=int_widens_to_float)
            for x, y in zip(a, b)
        )
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(
            values_equal(v, b[k], int_widens_to_float=int_widens_to_float)
            for k, v in a.items()
        )
    return a == b
