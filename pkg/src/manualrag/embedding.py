"""Text-to-vector embedding with a deterministic offline default.

Two embedders share one interface: a hashed bag-of-words embedder that is a
pure function of (dim, text) and needs no model server, and an HTTP client
for a locally hosted embedding model.  All vectors are L2-normalized so the
index can treat cosine similarity as a dot product.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Protocol

import httpx
import numpy as np

from .errors import (
    BackendMalformed,
    BackendTimeout,
    BackendUnavailable,
    DimensionMismatch,
)

DEFAULT_HASH_DIM = 256

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class EmbeddingVector:
    """Fixed-dimension real vector; unit L2 norm unless it is the zero vector."""

    __slots__ = ("components",)

    def __init__(self, components) -> None:
        arr = np.asarray(components, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("embedding must be a 1-D vector")
        self.components = arr

    @property
    def dim(self) -> int:
        return int(self.components.shape[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def is_zero(self) -> bool:
        return not np.any(self.components)

    @classmethod
    def zero(cls, dim: int) -> "EmbeddingVector":
        return cls(np.zeros(dim))

    def __repr__(self) -> str:  # pragma: no cover
        return f"EmbeddingVector(dim={self.dim}, norm={self.norm():.6f})"


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between a and b; 0 by definition if either is zero."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} != dim {b.dim}")
    na = np.linalg.norm(a.components)
    nb = np.linalg.norm(b.components)
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(a.components, b.components) / (na * nb))
    return max(-1.0, min(1.0, value))


class EmbedderKind(str, Enum):
    DETERMINISTIC_HASH = "deterministic_hash"
    REMOTE_HTTP = "remote_http"


@dataclass(frozen=True)
class EmbedderSpec:
    kind: EmbedderKind
    dim: Optional[int] = None
    endpoint: Optional[str] = None
    model_name: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is EmbedderKind.DETERMINISTIC_HASH:
            dim = self.dim if self.dim is not None else DEFAULT_HASH_DIM
            if dim < 16:
                raise ValueError(f"hash embedder dim must be >= 16, got {dim}")
        elif self.kind is EmbedderKind.REMOTE_HTTP:
            if not self.endpoint or not self.model_name:
                raise ValueError("remote embedder requires endpoint and model_name")


class Embedder(Protocol):
    def embed(self, text: str) -> EmbeddingVector: ...


def _hash_bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


class DeterministicHashEmbedder:
    """Hashed bag-of-words term frequencies, L2-normalized.

    Lowercases, splits on non-alphanumerics, hashes each token into one of
    ``dim`` buckets.  Identical text always maps to an identical vector;
    empty or whitespace-only text maps to the zero vector.
    """

    def __init__(self, dim: int = DEFAULT_HASH_DIM) -> None:
        if dim < 16:
            raise ValueError(f"dim must be >= 16, got {dim}")
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        counts = np.zeros(self.dim)
        for token in _TOKEN_SPLIT.split(text.lower()):
            if token:
                counts[_hash_bucket(token, self.dim)] += 1.0
        norm = np.linalg.norm(counts)
        if norm == 0.0:
            return EmbeddingVector(counts)
        return EmbeddingVector(counts / norm)


class RemoteHttpEmbedder:
    """Client for a local embedding model server.

    Speaks the common local-server protocol: POST {endpoint}/api/embeddings
    with {"model", "prompt"}, expecting {"embedding": [...]} back.  Vectors
    are re-normalized locally.  In-flight requests are bounded and each
    request carries a timeout, so a wedged server cannot pile up work.
    """

    def __init__(
        self,
        endpoint: str,
        model_name: str,
        dim: Optional[int] = None,
        timeout: float = 30.0,
        max_concurrency: int = 4,
        transport: Optional[httpx.BaseTransport] = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.model_name = model_name
        self.dim = dim
        self._semaphore = threading.Semaphore(max_concurrency)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip() and self.dim is not None:
            return EmbeddingVector.zero(self.dim)
        with self._semaphore:
            try:
                response = self._client.post(
                    f"{self.endpoint}/api/embeddings",
                    json={"model": self.model_name, "prompt": text},
                )
            except httpx.TimeoutException as exc:
                raise BackendTimeout(f"embedding request timed out: {exc}") from exc
            except httpx.HTTPError as exc:
                raise BackendUnavailable(f"embedding server unreachable: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(
                f"embedding server returned HTTP {response.status_code}"
            )
        try:
            payload = response.json()
            raw = payload["embedding"]
            arr = np.asarray(raw, dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendMalformed(f"embedding response unusable: {exc}") from exc
        if arr.ndim != 1 or arr.size == 0:
            raise BackendMalformed("embedding response is not a flat vector")
        if self.dim is not None and arr.size != self.dim:
            raise BackendMalformed(
                f"embedding has dim {arr.size}, expected {self.dim}"
            )
        if not text.strip():
            return EmbeddingVector.zero(arr.size)
        norm = np.linalg.norm(arr)
        if norm == 0.0:
            return EmbeddingVector(arr)
        return EmbeddingVector(arr / norm)

    def close(self) -> None:
        self._client.close()


def make_embedder(
    spec: EmbedderSpec,
    transport: Optional[httpx.BaseTransport] = None,
) -> Embedder:
    if spec.kind is EmbedderKind.DETERMINISTIC_HASH:
        return DeterministicHashEmbedder(dim=spec.dim or DEFAULT_HASH_DIM)
    return RemoteHttpEmbedder(
        endpoint=spec.endpoint or "",
        model_name=spec.model_name or "",
        dim=spec.dim,
        transport=transport,
    )
