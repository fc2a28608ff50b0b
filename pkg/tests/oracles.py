"""Independent brute-force oracles used to pre-verify fixtures and check
results. These deliberately share no code with the package: TF-IDF cosine
is computed over plain dicts, rank correlation uses the classic d-squared
formula, and the finding-arity table is written out literally.
"""

from __future__ import annotations

import math
import re

from autofeedback import DetectionFinding, ErrorType

_TOKEN = re.compile(r"[^a-z0-9]+")


def oracle_tokens(text: str) -> list[str]:
    return [t for t in _TOKEN.split(text.lower()) if t]


def oracle_tfidf_score(a: str, b: str, corpus: list[str]) -> float:
    """TF-IDF cosine: tf = raw count, idf = ln((1+n)/(1+df)) + 1."""
    n = len(corpus)
    doc_tokens = [set(oracle_tokens(d)) for d in corpus]

    def idf(token: str) -> float:
        df = sum(1 for d in doc_tokens if token in d)
        return math.log((1 + n) / (1 + df)) + 1.0

    def weights(text: str) -> dict[str, float]:
        counts: dict[str, int] = {}
        for t in oracle_tokens(text):
            counts[t] = counts.get(t, 0) + 1
        return {t: c * idf(t) for t, c in counts.items()}

    wa, wb = weights(a), weights(b)
    if wa == wb:
        return 1.0 if wa else 0.0
    dot = sum(w * wb.get(t, 0.0) for t, w in wa.items())
    na = math.sqrt(sum(w * w for w in wa.values()))
    nb = math.sqrt(sum(w * w for w in wb.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(0.0, min(1.0, dot / (na * nb)))


def oracle_corpus_from_raw(raw_doc: dict) -> list[str]:
    """Rebuild the retriever corpus directly from the fixture JSON: one
    entry per API holding its name and every description/message text."""
    corpus = []
    for api in raw_doc["apis"]:
        parts = [api["name"], api.get("description", "")]
        for p in api.get("parameters", []):
            parts.append(p.get("description", ""))
        for e in api.get("exceptions", []):
            parts.append(f"Error {e['code']}: {e['message']}")
        corpus.append("\n".join(part for part in parts if part))
    return corpus


def oracle_spearman(xs: list[float], ys: list[float]) -> float:
    """Tie-free rank formula: 1 - 6 * sum(d^2) / (n * (n^2 - 1))."""
    n = len(xs)
    rank_x = {v: i + 1 for i, v in enumerate(sorted(xs))}
    rank_y = {v: i + 1 for i, v in enumerate(sorted(ys))}
    d_squared = sum((rank_x[a] - rank_y[b]) ** 2 for a, b in zip(xs, ys))
    return 1.0 - 6.0 * d_squared / (n * (n * n - 1))


# Return-value arity per error type: (offending?, suggested?, description?).
ARITY_TABLE = {
    ErrorType.E1: (False, False, False),
    ErrorType.E2_1: (True, False, False),
    ErrorType.E2_2: (True, True, False),
    ErrorType.E2_3: (True, True, False),
    ErrorType.E2_OTHER: (True, False, False),
    ErrorType.E3_1: (True, False, False),
    ErrorType.E3_2: (True, True, False),
    ErrorType.E3_3: (True, True, False),
    ErrorType.E3_OTHER: (True, False, False),
    ErrorType.E4_1: (True, False, True),
    ErrorType.E4_OTHER: (True, False, True),
    ErrorType.NONE: (False, False, False),
}


def arity_ok(finding: DetectionFinding) -> bool:
    offending, suggested, description = ARITY_TABLE[finding.error_type]
    return (
        (finding.offending_name is not None) == offending
        and (finding.suggested_name is not None) == suggested
        and (finding.param_description is not None) == description
    )
