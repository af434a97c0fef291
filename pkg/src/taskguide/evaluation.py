"""Offline retrieval evaluation: windowed matching at a fixed cadence, scored
by ROUGE-1/2/L and accuracy against gold segment annotations."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from taskguide.embeddings import fallback_embed_text
from taskguide.matcher import MatchState, match_from_transcripts
from taskguide.model import (
    EmbeddingStream,
    Spec,
    TranscriptChunk,
    validate_chunk_sequence,
)

TOKENIZATION_NOTE = "lowercase; split on whitespace and punctuation; no stemming"

_TOKEN_RE = re.compile(r"[a-z0-9']+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def zero(cls) -> "RougeScore":
        return cls(0.0, 0.0, 0.0)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _as_tokens(text_or_tokens: Union[str, Sequence[str]]) -> list[str]:
    if isinstance(text_or_tokens, str):
        return tokenize(text_or_tokens)
    return list(text_or_tokens)


def rouge_n(
    candidate: Union[str, Sequence[str]],
    reference: Union[str, Sequence[str]],
    n: int,
) -> RougeScore:
    """N-gram multiset overlap precision/recall/F1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    cand_grams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_grams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    total_cand = sum(cand_grams.values())
    total_ref = sum(ref_grams.values())
    if total_cand == 0 or total_ref == 0:
        return RougeScore.zero()
    overlap = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    precision = overlap / total_cand
    recall = overlap / total_ref
    return RougeScore(precision, recall, _f1(precision, recall))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(
    candidate: Union[str, Sequence[str]],
    reference: Union[str, Sequence[str]],
) -> RougeScore:
    """Longest-common-subsequence precision/recall/F1."""
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    if not cand or not ref:
        return RougeScore.zero()
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return RougeScore(precision, recall, _f1(precision, recall))


@dataclass(frozen=True)
class GoldSegment:
    start_ms: int
    end_ms: int
    item: int

    def __post_init__(self) -> None:
        if self.start_ms >= self.end_ms:
            raise ValueError(
                f"gold segment must have start_ms < end_ms, got [{self.start_ms}, {self.end_ms})"
            )
        if self.item < 0:
            raise ValueError(f"gold item index must be non-negative, got {self.item}")


@dataclass
class AnnotatedStream:
    """An embedding stream (or transcript chunks) paired with gold segments.

    Segments are half-open ``[start_ms, end_ms)``: a tick landing exactly on a
    boundary belongs to the later segment.
    """

    gold: list[GoldSegment]
    stream: EmbeddingStream | None = None
    chunks: list[TranscriptChunk] | None = None

    def __post_init__(self) -> None:
        if (self.stream is None) == (self.chunks is None):
            raise ValueError("provide exactly one of stream or chunks")
        if not self.gold:
            raise ValueError("gold segments must be non-empty")
        for prev, nxt in zip(self.gold, self.gold[1:]):
            if nxt.start_ms < prev.end_ms:
                raise ValueError(
                    f"gold segments must be sorted and non-overlapping: "
                    f"[{prev.start_ms},{prev.end_ms}) then [{nxt.start_ms},{nxt.end_ms})"
                )
        if self.chunks is not None:
            validate_chunk_sequence(self.chunks)

    def gold_item_at(self, t_ms: int) -> Optional[int]:
        for seg in self.gold:
            if seg.start_ms <= t_ms < seg.end_ms:
                return seg.item
        return None


@dataclass
class RetrievalScores:
    rouge1: RougeScore
    rouge2: RougeScore
    rouge_l: RougeScore
    accuracy: float
    ticks: int
    skipped_ticks: int

    def metric_row(self) -> tuple[float, float, float, float]:
        return (self.rouge1.f1, self.rouge2.f1, self.rouge_l.f1, self.accuracy)


def _score_ticks(
    spec: Spec,
    predictions: list[Optional[int]],
    gold_items: list[int],
) -> RetrievalScores:
    assert len(predictions) == len(gold_items)
    ticks = len(predictions)
    if ticks == 0:
        return RetrievalScores(
            RougeScore.zero(), RougeScore.zero(), RougeScore.zero(), 0.0, 0, 0
        )
    correct = 0
    r1_parts: list[RougeScore] = []
    r2_parts: list[RougeScore] = []
    rl_parts: list[RougeScore] = []
    for predicted, gold in zip(predictions, gold_items):
        gold_text = spec.items[gold].text
        if predicted is None:
            r1_parts.append(RougeScore.zero())
            r2_parts.append(RougeScore.zero())
            rl_parts.append(RougeScore.zero())
            continue
        if predicted == gold:
            correct += 1
        predicted_text = spec.items[predicted].text
        r1_parts.append(rouge_n(predicted_text, gold_text, 1))
        r2_parts.append(rouge_n(predicted_text, gold_text, 2))
        rl_parts.append(rouge_l(predicted_text, gold_text))

    def mean(parts: list[RougeScore]) -> RougeScore:
        return RougeScore(
            sum(p.precision for p in parts) / ticks,
            sum(p.recall for p in parts) / ticks,
            sum(p.f1 for p in parts) / ticks,
        )

    return RetrievalScores(
        rouge1=mean(r1_parts),
        rouge2=mean(r2_parts),
        rouge_l=mean(rl_parts),
        accuracy=correct / ticks,
        ticks=ticks,
        skipped_ticks=0,
    )


def evaluate_retrieval(
    spec: Spec,
    annotated: AnnotatedStream,
    window_ms: int = 6000,
    cadence_ms: int = 1000,
    item_vectors: np.ndarray | None = None,
    embed: Callable[[str], np.ndarray] | None = None,
) -> RetrievalScores:
    """Run the matcher over the stream and score it at every cadence tick.

    Ticks are anchored to stream timestamps (first to last, every
    ``cadence_ms``).  Ticks outside gold coverage are skipped and counted.
    For transcript input the prediction at a tick is the match of the latest
    chunk that has started by then; ``window_ms`` plays no role there.
    """
    if cadence_ms <= 0:
        raise ValueError(f"cadence_ms must be positive, got {cadence_ms}")
    for seg in annotated.gold:
        if seg.item >= len(spec.items):
            raise ValueError(f"gold segment item index out of range: {seg.item}")

    predictions: list[Optional[int]] = []
    gold_items: list[int] = []
    skipped = 0

    if annotated.stream is not None:
        stream = annotated.stream
        if len(stream) == 0:
            raise ValueError("stream has no entries")
        if item_vectors is None:
            if embed is not None:
                item_vectors = np.stack([embed(item.text) for item in spec.items])
            else:
                item_vectors = np.stack(
                    [fallback_embed_text(item.text, stream.dim) for item in spec.items]
                )
        state = MatchState(spec, item_vectors, window_ms=window_ms)
        first_t = int(stream.timestamps_ms[0])
        last_t = int(stream.timestamps_ms[-1])
        entry_iter = stream.entries()
        pending = next(entry_iter, None)
        t = first_t
        while t <= last_t:
            while pending is not None and pending[0] <= t:
                state.observe(pending[0], pending[1])
                pending = next(entry_iter, None)
            gold = annotated.gold_item_at(t)
            if gold is None:
                skipped += 1
            else:
                predictions.append(state.estimate().item)
                gold_items.append(gold)
            t += cadence_ms
    else:
        chunks = annotated.chunks or []
        if not chunks:
            raise ValueError("chunks must be non-empty")
        if embed is None:
            embed = lambda text: fallback_embed_text(text)  # noqa: E731
        per_chunk = match_from_transcripts(spec, chunks, embed)
        first_t = chunks[0].start_ms
        last_t = chunks[-1].end_ms
        t = first_t
        while t <= last_t:
            gold = annotated.gold_item_at(t)
            if gold is None:
                skipped += 1
            else:
                latest: Optional[int] = None
                for idx, chunk in enumerate(chunks):
                    if chunk.start_ms <= t:
                        latest = idx
                    else:
                        break
                predictions.append(per_chunk[latest] if latest is not None else None)
                gold_items.append(gold)
            t += cadence_ms

    scores = _score_ticks(spec, predictions, gold_items)
    scores.skipped_ticks = skipped
    return scores


@dataclass
class ReportRow:
    label: str
    scores: RetrievalScores
    window_ms: Optional[int] = None


def report_table(rows: Sequence[ReportRow]) -> tuple[str, dict]:
    """Fixed-format text table plus a full-precision JSON-ready dict."""
    header = f"{'configuration':<24}{'R1':>8}{'R2':>8}{'RL':>8}{'Acc':>8}"
    lines = [header, "-" * len(header)]
    for row in rows:
        r1, r2, rl, acc = row.scores.metric_row()
        lines.append(
            f"{row.label:<24}{r1:>8.3f}{r2:>8.3f}{rl:>8.3f}{acc:>8.3f}"
        )
    text = "\n".join(lines)

    def rouge_dict(score: RougeScore) -> dict:
        return {"precision": score.precision, "recall": score.recall, "f1": score.f1}

    data = {
        "tokenization": TOKENIZATION_NOTE,
        "configurations": [
            {
                "label": row.label,
                **({"window_ms": row.window_ms} if row.window_ms is not None else {}),
                "rouge1": rouge_dict(row.scores.rouge1),
                "rouge2": rouge_dict(row.scores.rouge2),
                "rouge_l": rouge_dict(row.scores.rouge_l),
                "accuracy": row.scores.accuracy,
                "ticks": row.scores.ticks,
                "skipped_ticks": row.scores.skipped_ticks,
            }
            for row in rows
        ],
    }
    return text, data
