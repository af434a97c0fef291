"""Embedding supply: binary stream ingestion and a deterministic fallback text encoder.

Real encoder outputs (frame features, sentence vectors) are produced offline
and ingested from files; the fallback encoder hashes character trigrams so the
whole pipeline runs with no model weights and fully reproducible vectors.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from taskguide.model import EmbeddingStream, Spec

MAGIC = b"TGEMB1\x00"
_HEADER = struct.Struct("<II")  # dim, row count

# Fixed, documented key for the trigram hash.  Embeddings must be identical
# across runs and platforms, so Python's salted hash() is off the table.
TRIGRAM_HASH_KEY = b"taskguide-trigram-v1"

FALLBACK_DIM_DEFAULT = 64
_MIN_FALLBACK_DIM = 8


class EmbeddingFormatError(ValueError):
    """An embedding file failed to parse or violated a stream invariant."""


def write_embedding_file(
    path: Union[str, Path],
    stream: EmbeddingStream,
    source_model: str = "unknown",
) -> Path:
    """Write the binary stream plus a JSON sidecar manifest (``<path>.json``)."""
    path = Path(path)
    rows = np.empty(
        len(stream), dtype=np.dtype([("t", "<u8"), ("v", "<f4", (stream.dim,))])
    )
    rows["t"] = stream.timestamps_ms.astype(np.uint64)
    rows["v"] = stream.vectors.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(stream.dim, len(stream)))
        fh.write(rows.tobytes())
    manifest = {"source_model": source_model, "cadence_ms": stream.cadence_ms}
    Path(str(path) + ".json").write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def ingest_embedding_file(source: Union[str, Path, bytes]) -> EmbeddingStream:
    """Parse a binary embedding file; every malformation raises, never corrupts."""
    manifest: dict | None = None
    if isinstance(source, (str, Path)):
        path = Path(source)
        data = path.read_bytes()
        sidecar = Path(str(path) + ".json")
        if sidecar.exists():
            manifest = json.loads(sidecar.read_text())
    else:
        data = bytes(source)

    if len(data) < len(MAGIC) + _HEADER.size:
        raise EmbeddingFormatError("truncated embedding file")
    if data[: len(MAGIC)] != MAGIC:
        raise EmbeddingFormatError("bad magic number")
    dim, count = _HEADER.unpack_from(data, len(MAGIC))
    if dim <= 0:
        raise EmbeddingFormatError("dim must be positive")
    row_dtype = np.dtype([("t", "<u8"), ("v", "<f4", (dim,))])
    body = data[len(MAGIC) + _HEADER.size :]
    if len(body) != count * row_dtype.itemsize:
        raise EmbeddingFormatError(
            f"row payload size mismatch: expected {count * row_dtype.itemsize} bytes, "
            f"got {len(body)}"
        )
    rows = np.frombuffer(body, dtype=row_dtype)
    timestamps = rows["t"].astype(np.int64)
    vectors = rows["v"].reshape(count, dim)
    if count > 1 and not np.all(np.diff(timestamps) > 0):
        raise EmbeddingFormatError("non-monotone timestamps")
    if not np.all(np.isfinite(vectors)):
        raise EmbeddingFormatError("non-finite vector")
    cadence = manifest.get("cadence_ms") if manifest else None
    source_model = manifest.get("source_model") if manifest else None
    return EmbeddingStream(
        timestamps_ms=timestamps,
        vectors=np.array(vectors),  # own the memory; frombuffer views are read-only
        cadence_ms=cadence,
        source=source_model,
    )


def _trigrams(text: str) -> list[str]:
    normalized = " ".join(text.lower().split())
    if not normalized:
        return []
    padded = f" {normalized} "
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


def _bucket(trigram: str, dim: int) -> int:
    digest = hashlib.blake2s(
        trigram.encode("utf-8"), key=TRIGRAM_HASH_KEY, digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") % dim


def fallback_embed_text(text: str, dim: int = FALLBACK_DIM_DEFAULT) -> np.ndarray:
    """Bag of hashed character trigrams, L2-normalized.

    Empty (or whitespace-only) text embeds to the zero vector, which
    downstream similarity treats as "no estimate" rather than an error.
    """
    if dim < _MIN_FALLBACK_DIM:
        raise ValueError(f"dim must be at least {_MIN_FALLBACK_DIM}, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for grams in _trigrams(text):
        vec[_bucket(grams, dim)] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


def is_empty_embedding(vector: np.ndarray) -> bool:
    """True for the zero vector produced by empty text."""
    return not np.any(np.asarray(vector))


@dataclass(frozen=True)
class EmbeddingSource:
    """Where a session's vectors come from: an ingested file or the fallback encoder."""

    kind: str  # "ingested-file" | "fallback-text-encoder"
    dim: int

    def __post_init__(self) -> None:
        if self.kind not in ("ingested-file", "fallback-text-encoder"):
            raise ValueError(f"unknown embedding source kind: {self.kind!r}")
        if self.dim <= 0:
            raise ValueError("dim must be positive")

    @classmethod
    def fallback(cls, dim: int = FALLBACK_DIM_DEFAULT) -> "EmbeddingSource":
        return cls(kind="fallback-text-encoder", dim=dim)

    @classmethod
    def ingested(cls, stream: EmbeddingStream) -> "EmbeddingSource":
        return cls(kind="ingested-file", dim=stream.dim)

    def embed_text(self, text: str) -> np.ndarray:
        if self.kind != "fallback-text-encoder":
            raise ValueError("ingested-file sources do not embed text")
        return fallback_embed_text(text, self.dim)


def embed_spec_items(spec: Spec, dim: int = FALLBACK_DIM_DEFAULT) -> np.ndarray:
    """Fallback-encoder vectors for every item text, as an (items x dim) matrix."""
    return np.stack([fallback_embed_text(item.text, dim) for item in spec.items])
