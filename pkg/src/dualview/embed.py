"""Vector embeddings: store, cosine similarity, encoders and binary on-disk format.

Similarity is computed in float64 as elementwise-multiply + numpy pairwise sum.
That reduction is bit-identical between the batched path (``row_dots``) and the
per-pair path (``cosine`` / ``dot``), which keeps exact-equality oracles
meaningful; BLAS matrix kernels do not have this property.

On-disk format (little-endian): magic ``CLPV``, version u32, dim u32,
normalized flag u8, record count u64, then per record an id length u32, the
raw utf-8 id bytes, and dim float32 values.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import FormatError, IntegrityError

STORE_MAGIC = b"CLPV"
STORE_VERSION = 1
HEADER_BYTES = 4 + 4 + 4 + 1 + 8  # magic, version, dim, flag, count
MIN_HASHING_DIM = 8


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    vector: np.ndarray


class Encoder(Protocol):
    """Anything that can turn a batch of texts into fixed-dimension vectors."""

    dim: int

    def encode(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def dot(a: np.ndarray, b: np.ndarray) -> float:
    """Float64 inner product using the pairwise-sum reduction (see module doc)."""
    return float(np.multiply(a, b, dtype=np.float64).sum())


def row_dots(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Inner product of every matrix row with ``vec``; bitwise equal to
    calling ``dot(row, vec)`` per row."""
    return np.multiply(matrix, vec, dtype=np.float64).sum(axis=1)


def norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.multiply(a, a, dtype=np.float64).sum()))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two nonzero vectors of equal dimension."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = norm(a)
    norm_b = norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine is undefined for zero-norm vectors")
    return dot(a, b) / (norm_a * norm_b)


def normalize(vector: np.ndarray) -> np.ndarray:
    """Unit-norm float32 copy of ``vector``."""
    v = np.asarray(vector, dtype=np.float64)
    n = norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (v / n).astype(np.float32)


class VectorStore:
    """Immutable-after-build, id-keyed collection of same-dimension vectors."""

    def __init__(self, dim: int, normalized: bool = True):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.normalized = normalized
        self._records: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._records

    @property
    def ids(self) -> list[str]:
        return list(self._records)

    def add(self, record_id: str, vector: np.ndarray) -> None:
        if record_id in self._records:
            raise IntegrityError(f"duplicate embedding id {record_id!r}")
        v = np.asarray(vector)
        if v.shape != (self.dim,):
            raise ValueError(
                f"vector for {record_id!r} has shape {v.shape}, expected ({self.dim},)"
            )
        if self.normalized:
            v = normalize(v)
        else:
            v = v.astype(np.float32)
        self._records[record_id] = v

    def _add_raw(self, record_id: str, vector: np.ndarray) -> None:
        """Insert already-validated float32 data (used by load_store)."""
        self._records[record_id] = vector

    def vector(self, record_id: str) -> np.ndarray:
        try:
            return self._records[record_id]
        except KeyError:
            raise KeyError(f"no embedding for id {record_id!r}") from None

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Float64 matrix with one row per id, in the given order."""
        rows = [self.vector(record_id) for record_id in ids]
        if not rows:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack(rows).astype(np.float64)

    @classmethod
    def from_records(
        cls, records: Iterable[EmbeddingRecord], dim: int, normalized: bool = True
    ) -> "VectorStore":
        store = cls(dim=dim, normalized=normalized)
        for record in records:
            store.add(record.id, record.vector)
        return store


def hashing_encoder(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic bag-of-words embedding via the signed hashing trick.

    Each lowercase whitespace token contributes +-1 at a seeded-hash index;
    the result is L2-normalized. Raises on an empty token stream.
    """
    if dim < MIN_HASHING_DIM:
        raise ValueError(f"dim must be >= {MIN_HASHING_DIM}, got {dim}")
    tokens = text.lower().split()
    if not tokens:
        raise ValueError("cannot encode an empty token stream (zero vector)")
    vec = np.zeros(dim, dtype=np.float64)
    key = str(seed).encode("utf-8")
    for token in tokens:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16, key=key).digest()
        value = int.from_bytes(digest, "little")
        index = value % dim
        sign = 1.0 if (value >> 64) & 1 else -1.0
        vec[index] += sign
    n = norm(vec)
    if n == 0.0:
        raise ValueError("token contributions cancelled to a zero vector")
    return vec / n


class HashingEncoder:
    """Encoder facade over ``hashing_encoder`` with a fixed (dim, seed)."""

    def __init__(self, dim: int, seed: int = 0):
        if dim < MIN_HASHING_DIM:
            raise ValueError(f"dim must be >= {MIN_HASHING_DIM}, got {dim}")
        self.dim = dim
        self.seed = seed

    def encode(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [hashing_encoder(text, self.dim, self.seed) for text in texts]


class HttpEncoder:
    """Client for the batch encode protocol.

    Request: ``{"texts": [...], "role": ...}`` (role omitted when unset);
    response: ``{"dim": d, "vectors": [[...], ...]}``. The dimension is taken
    from the endpoint's ``/health`` answer when available, otherwise from the
    first encode response.
    """

    def __init__(self, url: str, role: str | None = None,
                 batch_size: int = 64, timeout: float = 120.0):
        import requests

        self._requests = requests
        self.url = url.rstrip("/")
        self.role = role
        self.batch_size = batch_size
        self.timeout = timeout
        self.dim = 0
        try:
            health = requests.get(f"{self.url}/health", timeout=timeout)
            if health.ok:
                self.dim = int(health.json().get("dim", 0))
        except requests.RequestException:
            pass

    def encode(self, texts: Sequence[str]) -> list[np.ndarray]:
        from .errors import TransportError

        vectors: list[np.ndarray] = []
        for batch_index, start in enumerate(range(0, len(texts), self.batch_size)):
            payload: dict = {"texts": list(texts[start : start + self.batch_size])}
            if self.role is not None:
                payload["role"] = self.role
            try:
                response = self._requests.post(
                    f"{self.url}/encode", json=payload, timeout=self.timeout
                )
                response.raise_for_status()
                body = response.json()
            except (self._requests.RequestException, ValueError) as exc:
                raise TransportError(f"encode batch {batch_index} failed: {exc}") from exc
            if "dim" not in body or "vectors" not in body:
                raise TransportError(f"encode batch {batch_index}: malformed response")
            if not self.dim:
                self.dim = int(body["dim"])
            vectors.extend(np.asarray(v, dtype=np.float64) for v in body["vectors"])
        return vectors


def encode_batch(
    texts: Sequence[str],
    encoder: Encoder,
    ids: Sequence[str] | None = None,
    normalized: bool = True,
) -> list[EmbeddingRecord]:
    """Encode texts in order; record ids default to the positional index."""
    if ids is not None and len(ids) != len(texts):
        raise ValueError(f"{len(ids)} ids for {len(texts)} texts")
    vectors = encoder.encode(texts)
    if len(vectors) != len(texts):
        raise ValueError(
            f"encoder returned {len(vectors)} vectors for {len(texts)} texts"
        )
    records = []
    for i, vector in enumerate(vectors):
        record_id = ids[i] if ids is not None else str(i)
        records.append(
            EmbeddingRecord(id=record_id, vector=normalize(vector) if normalized else vector)
        )
    return records


def save_store(store: VectorStore, path: str | Path) -> None:
    with open(path, "wb") as handle:
        handle.write(STORE_MAGIC)
        handle.write(struct.pack("<I", STORE_VERSION))
        handle.write(struct.pack("<I", store.dim))
        handle.write(struct.pack("<B", 1 if store.normalized else 0))
        handle.write(struct.pack("<Q", len(store)))
        for record_id in store.ids:
            encoded = record_id.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
            vector = store.vector(record_id)
            handle.write(np.asarray(vector, dtype="<f4").tobytes())


def load_store(path: str | Path) -> VectorStore:
    """Inverse of save_store, bit-exact. Raises FormatError naming the file
    offset of the first problem."""
    with open(path, "rb") as handle:
        data = handle.read()

    def take(offset: int, count: int) -> bytes:
        if offset + count > len(data):
            raise FormatError(
                f"{path}: truncated at offset {len(data)}, needed {offset + count} bytes"
            )
        return data[offset : offset + count]

    if take(0, 4) != STORE_MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0")
    (version,) = struct.unpack("<I", take(4, 4))
    if version != STORE_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    (dim,) = struct.unpack("<I", take(8, 4))
    if dim < 1:
        raise FormatError(f"{path}: invalid dim {dim} at offset 8")
    (flag,) = struct.unpack("<B", take(12, 1))
    (count,) = struct.unpack("<Q", take(13, 8))
    store = VectorStore(dim=dim, normalized=bool(flag))
    offset = HEADER_BYTES
    for index in range(count):
        (id_len,) = struct.unpack("<I", take(offset, 4))
        offset += 4
        record_id = take(offset, id_len).decode("utf-8")
        offset += id_len
        raw = take(offset, dim * 4)
        offset += dim * 4
        if record_id in store:
            raise IntegrityError(f"{path}: duplicate id {record_id!r} (record {index})")
        store._add_raw(record_id, np.frombuffer(raw, dtype="<f4").copy())
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes at offset {offset}")
    return store
