"""Text similarity, the instruction-to-API retriever, and the chunked
documentation index used to look up error details.

The default similarity model is deterministic TF-IDF token cosine so the
whole pipeline runs offline; any embedding service can be dropped in by
implementing :class:`SimilarityModel`.
"""

from __future__ import annotations

import math
import re
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import requests

from .doc_model import ApiDocument, ApiSpec
from .errors import EmptyDocumentError, ProtocolError, TransportError

__all__ = [
    "SimilarityModel",
    "TfidfSimilarity",
    "RemoteEmbeddingSimilarity",
    "default_similarity",
    "RelevantSet",
    "retrieve_relevant_apis",
    "Chunk",
    "ChunkIndex",
    "build_chunk_index",
    "retrieve_error_message",
    "RetrievedMessage",
    "api_documentation_text",
    "split_sentences",
]

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


class SimilarityModel(ABC):
    """Scores text pairs in [0, 1] and embeds text as fixed-length vectors."""

    @abstractmethod
    def embed(self, text: str) -> np.ndarray:
        """L2-normalized vector; length is constant per model instance."""

    def score(self, text_a: str, text_b: str) -> float:
        """Cosine of the two embeddings, clamped to [0, 1]."""
        sim = float(np.dot(self.embed(text_a), self.embed(text_b)))
        return min(1.0, max(0.0, sim))


class TfidfSimilarity(SimilarityModel):
    """TF-IDF weighted token cosine.

    tf is the raw token count; idf(t) = ln((1+n) / (1+df(t))) + 1 over the
    fitted corpus, with df = 0 for unseen tokens. ``embed`` projects onto
    the corpus vocabulary (out-of-vocabulary tokens drop out); ``score``
    works on the token union of the two texts, so identical non-trivial
    texts always score 1.0 even when their words are out of vocabulary.
    """

    def __init__(self, corpus: Iterable[str] = ()):
        docs = [set(tokenize(text)) for text in corpus]
        self._n_docs = len(docs)
        df: dict[str, int] = {}
        for doc in docs:
            for token in doc:
                df[token] = df.get(token, 0) + 1
        self._vocab = {t: i for i, t in enumerate(sorted(df))}
        self._idf = {t: self._idf_value(count) for t, count in df.items()}
        self._unseen_idf = self._idf_value(0)

    def _idf_value(self, df: int) -> float:
        return math.log((1 + self._n_docs) / (1 + df)) + 1.0

    def _weights(self, text: str) -> dict[str, float]:
        counts: dict[str, int] = {}
        for token in tokenize(text):
            counts[token] = counts.get(token, 0) + 1
        return {
            t: c * self._idf.get(t, self._unseen_idf) for t, c in counts.items()
        }

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(len(self._vocab))
        for token, weight in self._weights(text).items():
            idx = self._vocab.get(token)
            if idx is not None:
                vec[idx] = weight
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def score(self, text_a: str, text_b: str) -> float:
        wa = self._weights(text_a)
        wb = self._weights(text_b)
        if wa == wb:
            # Equal token multisets (including reorderings) score exactly 1.
            return 1.0 if wa else 0.0
        dot = sum(w * wb.get(t, 0.0) for t, w in wa.items())
        norm_a = math.sqrt(sum(w * w for w in wa.values()))
        norm_b = math.sqrt(sum(w * w for w in wb.values()))
        if norm_a == 0.0 or norm_b == 0.0:
            return 0.0
        return min(1.0, max(0.0, dot / (norm_a * norm_b)))


class RemoteEmbeddingSimilarity(SimilarityModel):
    """Drop-in embedding service adapter.

    Sends ``{"input": [text], "model": name}`` and reads
    ``data[0].embedding``; vectors are L2-normalized and cached per text,
    and scoring is the inherited clamped cosine. The first response pins
    the vector length; any later deviation is a protocol error.
    """

    def __init__(
        self,
        base_url: str,
        model_name: str,
        api_key: str = "",
        timeout: float = 30.0,
        retry_base_delay: float = 1.0,
    ):
        self._url = base_url.rstrip("/") + "/embeddings"
        self._model_name = model_name
        self._api_key = api_key
        self._timeout = timeout
        self._retry_base_delay = retry_base_delay
        self._cache: dict[str, np.ndarray] = {}
        self._dim: int | None = None

    def embed(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        payload = {"input": [text], "model": self._model_name}
        last_error: Exception | None = None
        response = None
        for attempt in range(3):
            try:
                response = requests.post(
                    self._url, json=payload, headers=headers, timeout=self._timeout
                )
                if response.status_code < 500:
                    break
                last_error = TransportError(f"server error {response.status_code}")
            except requests.RequestException as exc:
                last_error = exc
            response = None
            if attempt < 2:
                time.sleep(self._retry_base_delay * (2**attempt))
        if response is None:
            raise TransportError(f"{self._url} unreachable") from last_error
        try:
            vector = np.asarray(
                response.json()["data"][0]["embedding"], dtype=float
            )
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed embedding response: {exc}") from exc
        if self._dim is None:
            self._dim = vector.shape[0]
        elif vector.shape[0] != self._dim:
            raise ProtocolError(
                f"embedding length changed from {self._dim} to {vector.shape[0]}"
            )
        norm = np.linalg.norm(vector)
        if norm > 0:
            vector = vector / norm
        self._cache[text] = vector
        return vector


def api_documentation_text(api: ApiSpec) -> str:
    """All retrievable text of one API: description, parameter
    descriptions, and exception messages rendered as ``Error code: message``."""
    parts = [api.description]
    parts.extend(p.description for p in api.params)
    parts.extend(f"Error {code}: {message}" for code, message in api.exceptions)
    return "\n".join(part for part in parts if part)


def default_similarity(
    source: ApiDocument | Iterable[str] | None = None,
) -> TfidfSimilarity:
    """TF-IDF model with idf fitted on the given corpus.

    An :class:`ApiDocument` contributes one corpus entry per API (its name
    plus all documentation text); ``None`` yields a corpus-free model in
    which every token weighs the same.
    """
    if source is None:
        return TfidfSimilarity(())
    if isinstance(source, ApiDocument):
        corpus = [f"{a.name}\n{api_documentation_text(a)}" for a in source.apis]
        return TfidfSimilarity(corpus)
    return TfidfSimilarity(source)


@dataclass(frozen=True)
class RelevantSet:
    """Top-k APIs ranked by instruction similarity, scores non-increasing."""

    entries: tuple[tuple[str, float], ...] = ()

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.entries)


def retrieve_relevant_apis(
    instruction: str, doc: ApiDocument, model: SimilarityModel, k: int
) -> RelevantSet:
    """Rank APIs by score(instruction, description); keep the top min(k, |doc|).

    Ties keep document order.
    """
    if not doc.apis:
        raise EmptyDocumentError("cannot retrieve from an empty document")
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [(api.name, model.score(instruction, api.description)) for api in doc.apis]
    ranked = sorted(scored, key=lambda pair: -pair[1])
    return RelevantSet(tuple(ranked[: min(k, len(ranked))]))


_SENTENCE_SPLIT = re.compile(r"(?<=[.?!])\s+|\n+")


def split_sentences(text: str) -> list[str]:
    """Split on sentence-final punctuation followed by whitespace, and on
    newlines."""
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


@dataclass(frozen=True)
class Chunk:
    """A block of semantically adjacent sentences from one API's docs."""

    api_name: str
    sentences: tuple[str, ...]
    text: str
    vector: np.ndarray


@dataclass(frozen=True)
class ChunkIndex:
    """Immutable per-API chunk store; vectors are the chunk-text embeddings."""

    chunks: dict[str, tuple[Chunk, ...]]

    def for_api(self, api_name: str) -> tuple[Chunk, ...]:
        return self.chunks.get(api_name, ())

    @property
    def api_names(self) -> tuple[str, ...]:
        return tuple(self.chunks)


def build_chunk_index(
    doc: ApiDocument, model: SimilarityModel, chunk_threshold: float
) -> ChunkIndex:
    """Sentence-split each API's documentation and chunk greedily.

    A sentence joins the current chunk while its similarity to the chunk's
    joined text stays at or above *chunk_threshold*; otherwise it starts a
    new chunk. Every sentence lands in exactly one chunk of its API.
    """
    if not 0.0 < chunk_threshold < 1.0:
        raise ValueError("chunk_threshold must be in (0, 1)")
    index: dict[str, tuple[Chunk, ...]] = {}
    for api in doc.apis:
        sentences = split_sentences(api_documentation_text(api))
        groups: list[list[str]] = []
        for sentence in sentences:
            if groups and model.score(sentence, " ".join(groups[-1])) >= chunk_threshold:
                groups[-1].append(sentence)
            else:
                groups.append([sentence])
        chunks = []
        for group in groups:
            text = " ".join(group)
            chunks.append(Chunk(api.name, tuple(group), text, model.embed(text)))
        index[api.name] = tuple(chunks)
    return ChunkIndex(index)


@dataclass(frozen=True)
class RetrievedMessage:
    """The documentation text retrieved for a failing API response."""

    text: str
    source_api: str
    similarity: float

    def __post_init__(self):
        if not 0.0 <= self.similarity <= 1.0:
            raise ValueError("similarity must be in [0, 1]")


def retrieve_error_message(
    api_name: str, query: str, index: ChunkIndex, model: SimilarityModel
) -> RetrievedMessage | None:
    """Nearest chunk of *api_name* to the query embedding, or ``None`` when
    the API has no chunks. Exhaustive search; ties keep chunk order."""
    chunks = index.for_api(api_name)
    if not chunks:
        return None
    query_vec = model.embed(query)
    best = chunks[0]
    best_sim = float(np.dot(query_vec, chunks[0].vector))
    for chunk in chunks[1:]:
        sim = float(np.dot(query_vec, chunk.vector))
        if sim > best_sim:
            best, best_sim = chunk, sim
    return RetrievedMessage(best.text, api_name, min(1.0, max(0.0, best_sim)))
