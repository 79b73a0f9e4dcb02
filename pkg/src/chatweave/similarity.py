"""The match function: character n-gram containment OR a semantic score.

A comment matches a response when enough of the comment's character n-grams
reappear in the response (the streamer repeated it), or when an optional
semantic scorer says the two are close (the streamer summarized it).
"""

from __future__ import annotations

from collections import Counter
from typing import Protocol, Sequence

import numpy as np

from ._http import TransportError, post_json
from .model import ExtractionConfig

__all__ = [
    "SparseBag",
    "SemanticScorer",
    "EmbeddingClient",
    "EmbeddingScorer",
    "DimensionMismatchError",
    "TransportError",
    "bow_vector",
    "lexical_containment",
    "containment_of_bags",
    "remote_embed",
    "match_fn",
]

SparseBag = Counter  # n-gram -> positive count


class DimensionMismatchError(ValueError):
    pass


def bow_vector(text: str, ngram_order: int = 2) -> SparseBag:
    """Count the character n-grams of ``text``; text shorter than n is one gram."""
    if not text:
        raise ValueError("empty text")
    if len(text) <= ngram_order:
        return Counter((text,))
    return Counter(text[i:i + ngram_order] for i in range(len(text) - ngram_order + 1))


def containment_of_bags(comment_bag: dict, response_bag: dict) -> float:
    total = 0
    shared = 0
    get = response_bag.get
    for gram, n in comment_bag.items():
        total += n
        m = get(gram)
        if m:
            shared += n if n < m else m
    return shared / total


def containment_with_bags(comment: str, response: str, comment_bag: dict, response_bag: dict,
                          ngram_order: int) -> float:
    # a comment shorter than n is one short gram; look for it as a substring,
    # otherwise it could never be found among the response's full-length grams
    if len(comment) < ngram_order:
        return 1.0 if comment in response else 0.0
    return containment_of_bags(comment_bag, response_bag)


def lexical_containment(comment: str, response: str, ngram_order: int = 2) -> float:
    """Share of the comment's n-grams (with multiplicity) that also occur in the response.

    A comment shorter than ``ngram_order`` scores 1.0 when it occurs in the
    response as a substring and 0.0 otherwise.
    """
    if not comment or not response:
        raise ValueError("empty text")
    if len(comment) < ngram_order:
        return 1.0 if comment in response else 0.0
    return containment_of_bags(bow_vector(comment, ngram_order), bow_vector(response, ngram_order))


class SemanticScorer(Protocol):
    def score(self, a: str, b: str) -> float: ...


def _unit_rows(vectors, n_texts: int) -> np.ndarray:
    if len(vectors) != n_texts:
        raise DimensionMismatchError(f"service returned {len(vectors)} vectors for {n_texts} texts")
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatchError(f"inconsistent vector lengths {sorted(dims)}")
    arr = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("service returned a zero vector")
    return arr / norms


class EmbeddingClient:
    """Client for an embedding service speaking ``POST /embed``.

    Request ``{"texts": [...]}``, response ``{"vectors": [[...], ...]}`` in the same
    order. Vectors are L2-normalized here whatever the service sends.
    """

    def __init__(self, endpoint: str, *, attempts: int = 3, backoff: float = 0.2,
                 timeout: float = 10.0, batch_size: int = 64, sleep=None):
        self.url = endpoint.rstrip("/") + "/embed"
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.batch_size = batch_size
        self._sleep = sleep

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("no texts to embed")
        out = []
        kw = {"attempts": self.attempts, "backoff": self.backoff, "timeout": self.timeout}
        if self._sleep is not None:
            kw["sleep"] = self._sleep
        for i in range(0, len(texts), self.batch_size):
            batch = list(texts[i:i + self.batch_size])
            body = post_json(self.url, {"texts": batch}, **kw)
            try:
                vectors = body["vectors"]
            except (KeyError, TypeError):
                raise TransportError(f"malformed response from {self.url}: no 'vectors'") from None
            out.append(_unit_rows(vectors, len(batch)))
        result = np.vstack(out)
        if len({a.shape[1] for a in out}) != 1:
            raise DimensionMismatchError("vector length changed between batches")
        return result


def remote_embed(texts: Sequence[str], endpoint: str, **kwargs) -> list[list[float]]:
    return EmbeddingClient(endpoint, **kwargs).embed(texts).tolist()


class EmbeddingScorer:
    """Cosine similarity of remote embeddings, with a per-text cache."""

    def __init__(self, client: EmbeddingClient):
        self.client = client
        self._cache: dict[str, np.ndarray] = {}

    def _vec(self, text: str) -> np.ndarray:
        v = self._cache.get(text)
        if v is None:
            v = self._cache[text] = self.client.embed([text])[0]
        return v

    def prefetch(self, texts: Sequence[str]) -> None:
        todo = [t for t in dict.fromkeys(texts) if t not in self._cache]
        if todo:
            for t, v in zip(todo, self.client.embed(todo)):
                self._cache[t] = v

    def score(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        return float(np.clip(self._vec(a) @ self._vec(b), -1.0, 1.0))


def match_fn(comment: str, response: str, config: ExtractionConfig,
             semantic: SemanticScorer | None = None) -> bool:
    if lexical_containment(comment, response, config.ngram_order) >= config.theta_lex:
        return True
    return semantic is not None and semantic.score(comment, response) >= config.theta_sem
