"""Online estimation of the spec item currently being performed.

Each incoming frame vector is scored against every item vector by cosine
similarity; estimates aggregate those rows with an arithmetic mean over a
sliding time window and pick the argmax (ties go to the lowest item index).
"""

from __future__ import annotations

from collections import deque
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from taskguide.embeddings import FALLBACK_DIM_DEFAULT, fallback_embed_text
from taskguide.model import Spec, TranscriptChunk

DEFAULT_WINDOW_MS = 6000


class Estimate(NamedTuple):
    item: int
    score: float
    per_item: np.ndarray  # mean similarity per spec item over the window


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two vectors; 0 if either has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(a, b) / (norm_a * norm_b))
    return min(1.0, max(-1.0, value))


class MatchState:
    """Sliding-window similarity state for one session.

    The history ring keeps one (timestamp, per-item similarity row) entry per
    observed frame; entries older than ``window_ms`` relative to the newest
    timestamp are evicted, so estimates depend only on timestamps in
    ``(t - window_ms, t]``.
    """

    def __init__(
        self,
        spec: Spec,
        item_vectors: np.ndarray,
        window_ms: int = DEFAULT_WINDOW_MS,
    ) -> None:
        item_vectors = np.asarray(item_vectors, dtype=np.float64)
        if item_vectors.ndim != 2 or item_vectors.shape[0] != len(spec.items):
            raise ValueError(
                f"item_vectors must be ({len(spec.items)} x dim), got {item_vectors.shape}"
            )
        if window_ms <= 0:
            raise ValueError(f"window_ms must be positive, got {window_ms}")
        self.spec = spec
        self.item_vectors = item_vectors
        self.window_ms = int(window_ms)
        self._item_norms = np.linalg.norm(item_vectors, axis=1)
        self._history: deque[tuple[int, np.ndarray]] = deque()
        self.last_estimate: Optional[Estimate] = None

    @property
    def dim(self) -> int:
        return int(self.item_vectors.shape[1])

    def history(self) -> list[tuple[int, np.ndarray]]:
        return list(self._history)

    def _similarity_row(self, vector: np.ndarray) -> np.ndarray:
        norm_v = float(np.linalg.norm(vector))
        row = np.zeros(len(self._item_norms), dtype=np.float64)
        if norm_v == 0.0:
            return row
        ok = self._item_norms > 0.0
        row[ok] = (self.item_vectors[ok] @ vector) / (self._item_norms[ok] * norm_v)
        return np.clip(row, -1.0, 1.0)

    def observe(self, t_ms: int, vector: Sequence[float]) -> Estimate:
        """Record one frame vector and return the refreshed estimate."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1 or vector.shape[0] != self.dim:
            raise ValueError(
                f"dimension mismatch: expected {self.dim}, got {vector.shape}"
            )
        if self._history and t_ms <= self._history[-1][0]:
            raise ValueError(
                f"out-of-order timestamp: {t_ms} after {self._history[-1][0]}"
            )
        self._history.append((int(t_ms), self._similarity_row(vector)))
        cutoff = int(t_ms) - self.window_ms
        while self._history[0][0] <= cutoff:
            self._history.popleft()
        self.last_estimate = self._estimate_from_history()
        return self.last_estimate

    def estimate(self) -> Estimate:
        if self.last_estimate is None:
            raise ValueError("empty history: no frames observed yet")
        return self.last_estimate

    def _estimate_from_history(self) -> Estimate:
        rows = np.stack([row for _, row in self._history])
        means = rows.mean(axis=0)
        best = int(np.argmax(means))  # argmax takes the first max: lowest index wins ties
        return Estimate(item=best, score=float(means[best]), per_item=means)


def item_vectors_from_texts(
    spec: Spec,
    embed: Callable[[str], np.ndarray] | None = None,
    dim: int = FALLBACK_DIM_DEFAULT,
) -> np.ndarray:
    """Embed each item's text with ``embed`` (fallback encoder by default)."""
    if embed is None:
        embed = lambda text: fallback_embed_text(text, dim)  # noqa: E731
    return np.stack([np.asarray(embed(item.text), dtype=np.float64) for item in spec.items])


def match_from_transcripts(
    spec: Spec,
    chunks: Sequence[TranscriptChunk],
    embed: Callable[[str], np.ndarray],
) -> list[Optional[int]]:
    """Best-matching item index per chunk; empty-text chunks give no estimate."""
    if not chunks:
        raise ValueError("chunks must be non-empty")
    item_matrix = np.stack(
        [np.asarray(embed(item.text), dtype=np.float64) for item in spec.items]
    )
    results: list[Optional[int]] = []
    for chunk in chunks:
        if not chunk.text.strip():
            results.append(None)
            continue
        vec = np.asarray(embed(chunk.text), dtype=np.float64)
        sims = np.array(
            [cosine_similarity(vec, item_matrix[i]) for i in range(len(spec.items))]
        )
        results.append(int(np.argmax(sims)))
    return results
