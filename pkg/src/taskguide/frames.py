"""Semantic-frame extraction from text.

A base tagger produces BIO labels per token: either ingested pre-tagged
sentences (real role-labeler output, produced offline) or the built-in rule
tagger.  An expert mapping layer projects source role labels into the frame
slot space as a {0,1}-initialized linear map, after which contiguous B/I
spans are assembled into ``SemanticFrame`` values.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from taskguide.model import SLOT_NAMES, SemanticFrame

# Canonical target label order: O first, then B/I per slot in priority order.
TARGET_LABELS: tuple[str, ...] = ("O",) + tuple(
    f"{prefix}-{slot}" for slot in SLOT_NAMES for prefix in ("B", "I")
)

_TARGET_INDEX = {label: i for i, label in enumerate(TARGET_LABELS)}


class MappingError(ValueError):
    """A label mapping pair violated the declared label sets or BIO kinds."""


def _bio_kind(label: str) -> str:
    if label == "O":
        return "O"
    if label.startswith("B-") and len(label) > 2:
        return "B"
    if label.startswith("I-") and len(label) > 2:
        return "I"
    raise MappingError(f"label {label!r} is not O, B-<role>, or I-<role>")


@dataclass
class LabelMapping:
    """Linear projection from source role labels onto target slot labels.

    The matrix is real-valued so it could be fine-tuned later, but it is
    initialized strictly to {0,1}: one 1 per source column, at the mapped
    target row (or at O for unmapped sources).
    """

    source_labels: tuple[str, ...]
    target_labels: tuple[str, ...]
    matrix: np.ndarray  # (|target| x |source|)

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        expected = (len(self.target_labels), len(self.source_labels))
        if self.matrix.shape != expected:
            raise MappingError(
                f"matrix shape {self.matrix.shape} does not match labels {expected}"
            )
        if np.any(self.matrix.sum(axis=0) > 1.0 + 1e-12):
            raise MappingError("each source label may map to at most one target label")

    def target_for(self, source_label: str) -> str:
        j = self.source_labels.index(source_label)
        column = self.matrix[:, j]
        hot = np.nonzero(column)[0]
        return self.target_labels[int(hot[0])] if len(hot) else "O"


def build_mapping(
    pairs: Iterable[tuple[str, str]],
    source_labels: Sequence[str],
) -> LabelMapping:
    """Build the {0,1} projection from declared (source, target) label pairs.

    Sources not named in any pair default to O.  A source may not map to two
    different targets, and B/I/O kinds must agree between the two sides.
    """
    source_labels = tuple(source_labels)
    seen = set(source_labels)
    if len(seen) != len(source_labels):
        raise MappingError("source labels contain duplicates")
    for label in source_labels:
        _bio_kind(label)

    assigned: dict[str, str] = {}
    for source, target in pairs:
        if source not in seen:
            raise MappingError(f"unknown source label: {source!r}")
        if target not in _TARGET_INDEX:
            raise MappingError(f"unknown target label: {target!r}")
        if _bio_kind(source) != _bio_kind(target):
            raise MappingError(
                f"BIO kind mismatch: {source!r} cannot map to {target!r}"
            )
        if source in assigned and assigned[source] != target:
            raise MappingError(
                f"conflicting mapping for {source!r}: {assigned[source]!r} vs {target!r}"
            )
        assigned[source] = target

    matrix = np.zeros((len(TARGET_LABELS), len(source_labels)), dtype=np.float64)
    for j, source in enumerate(source_labels):
        target = assigned.get(source, "O")
        matrix[_TARGET_INDEX[target], j] = 1.0
    return LabelMapping(
        source_labels=source_labels, target_labels=TARGET_LABELS, matrix=matrix
    )


def apply_mapping(mapping: LabelMapping, scores: np.ndarray) -> np.ndarray:
    """Project per-token source scores into target-label space (rows x |target|)."""
    scores = np.asarray(scores, dtype=np.float64)
    single = scores.ndim == 1
    if single:
        scores = scores[None, :]
    if scores.shape[1] != len(mapping.source_labels):
        raise MappingError(
            f"score rows have {scores.shape[1]} columns, expected {len(mapping.source_labels)}"
        )
    projected = scores @ mapping.matrix.T
    return projected[0] if single else projected


def map_tags(mapping: LabelMapping, source_tags: Sequence[str]) -> list[str]:
    """One-hot convenience path: source tag list to target tag list."""
    lookup = {label: mapping.target_for(label) for label in mapping.source_labels}
    out = []
    for tag in source_tags:
        if tag not in lookup:
            raise MappingError(f"unknown source label: {tag!r}")
        out.append(lookup[tag])
    return out


def repair_bio(tags: Sequence[str]) -> list[str]:
    """Promote orphan I-x tags (no preceding B-x/I-x of the same role) to B-x.

    Idempotent: repairing an already-valid sequence changes nothing.
    """
    repaired: list[str] = []
    prev = "O"
    for tag in tags:
        kind = _bio_kind(tag)
        if kind == "I":
            role = tag[2:]
            if prev not in (f"B-{role}", f"I-{role}"):
                tag = f"B-{role}"
        repaired.append(tag)
        prev = tag
    return repaired


@dataclass
class FrameExtraction:
    """Frames assembled from one tagged sentence.

    With no Action span the single frame is empty and ``no_action`` is set;
    with several Action spans one frame is emitted per action (each keeps all
    non-action spans) and ``multiple_actions`` flags the deviation.
    """

    frames: list[SemanticFrame]
    no_action: bool = False
    multiple_actions: bool = False

    @property
    def frame(self) -> SemanticFrame:
        return self.frames[0]


def _spans_from_tags(
    tokens: Sequence[str], tags: Sequence[str]
) -> list[tuple[str, str]]:
    """(slot, span text) pairs for contiguous B/I runs, in token order."""
    spans: list[tuple[str, str]] = []
    current_slot: str | None = None
    current_tokens: list[str] = []
    for token, tag in zip(tokens, tags):
        if tag.startswith("B-"):
            if current_slot is not None:
                spans.append((current_slot, " ".join(current_tokens)))
            current_slot = tag[2:]
            current_tokens = [token]
        elif tag.startswith("I-") and current_slot == tag[2:]:
            current_tokens.append(token)
        else:  # "O" (repair has removed orphan I tags already)
            if current_slot is not None:
                spans.append((current_slot, " ".join(current_tokens)))
            current_slot = None
            current_tokens = []
    if current_slot is not None:
        spans.append((current_slot, " ".join(current_tokens)))
    return spans


def extract_frames(tokens: Sequence[str], tags: Sequence[str]) -> FrameExtraction:
    """Assemble frames from per-token target tags (BIO-repaired first)."""
    if len(tokens) != len(tags):
        raise ValueError(f"{len(tokens)} tokens but {len(tags)} tags")
    for tag in tags:
        if tag != "O" and tag not in _TARGET_INDEX:
            raise ValueError(f"unknown target label: {tag!r}")
    spans = _spans_from_tags(tokens, repair_bio(tags))
    action_spans = [text for slot, text in spans if slot == "Action"]
    other_spans = [(slot, text) for slot, text in spans if slot != "Action"]

    if not action_spans:
        return FrameExtraction(frames=[SemanticFrame()], no_action=True)

    frames = []
    for action in action_spans:
        frame = SemanticFrame()
        frame.add_span("Action", action)
        for slot, text in other_spans:
            frame.add_span(slot, text)
        frames.append(frame)
    return FrameExtraction(frames=frames, multiple_actions=len(action_spans) > 1)


def extract_frame(tokens: Sequence[str], tags: Sequence[str]) -> SemanticFrame:
    return extract_frames(tokens, tags).frame


# ---------------------------------------------------------------------------
# Rule tagger: a deterministic, lexicon-driven stand-in for a learned tagger.

ACTION_VERBS = frozenset(
    """
    add attach boil chop clean close connect cook cut dice drain dry empty
    fill flip fold fry grab grate grease heat hold insert jack knead lift
    loosen lower measure melt mix open peel place pour preheat press pull
    push put raise remove rinse rub scoop scrape season serve shake sharpen
    slice soak spread sprinkle squeeze stir take tighten transfer turn
    unscrew wait wash weigh whisk wipe
    """.split()
)

_TOOL_MARKERS = frozenset({"with", "using"})
_EXTENT_MARKERS = frozenset({"until"})
_LOCATION_MARKERS = frozenset({"in", "on", "into", "onto", "at", "inside"})
_CHUNK_BREAKERS = frozenset({"and", "then", "while", "so", "but", "now", "next"})

_WORD_RE = re.compile(r"[A-Za-z0-9']+")


def tokenize_words(text: str) -> list[str]:
    """Word tokens with punctuation stripped; original casing kept."""
    return _WORD_RE.findall(text)


def rule_tag(tokens: Sequence[str]) -> list[str]:
    """Tag tokens with target BIO labels using the imperative-verb lexicon.

    Rules: a lexicon verb opens an Action span and the words after it form a
    Receiver chunk; "with"/"using" opens a Tool chunk, "until" an Extent
    chunk, and "in"/"on"/... a Location chunk.  Conjunctions break chunks.
    """
    tags = ["O"] * len(tokens)
    mode: str | None = None  # slot currently being chunked
    chunk_open = False
    for i, token in enumerate(tokens):
        low = token.lower()
        if low in _TOOL_MARKERS:
            mode, chunk_open = "Tool", False
        elif low in _EXTENT_MARKERS:
            mode, chunk_open = "Extent", False
        elif low in _LOCATION_MARKERS:
            mode, chunk_open = "Location", False
        elif low in _CHUNK_BREAKERS:
            mode, chunk_open = None, False
        elif low in ACTION_VERBS and mode in (None, "Receiver"):
            tags[i] = "B-Action"
            mode, chunk_open = "Receiver", False
        elif mode is not None:
            tags[i] = f"{'I' if chunk_open else 'B'}-{mode}"
            chunk_open = True
    return tags


def frames_from_text(text: str) -> FrameExtraction:
    """Rule-tagger pipeline: tokenize, tag, extract."""
    tokens = tokenize_words(text)
    if not tokens:
        return FrameExtraction(frames=[SemanticFrame()], no_action=True)
    return extract_frames(tokens, rule_tag(tokens))


# ---------------------------------------------------------------------------
# Pre-tagged ingest: JSONL with {tokens, source_tags, scores?} per line.


@dataclass
class TaggedSentence:
    tokens: list[str]
    source_tags: list[str]
    scores: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.source_tags):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.source_tags)} source tags"
            )
        if self.scores is not None:
            self.scores = np.asarray(self.scores, dtype=np.float64)
            if self.scores.shape[0] != len(self.tokens):
                raise ValueError("scores must have one row per token")


def read_tagged_jsonl(source: Union[str, Path, bytes]) -> list[TaggedSentence]:
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text()
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = str(source)
    sentences = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {line_no}: malformed JSON: {exc}") from exc
        if "tokens" not in obj or "source_tags" not in obj:
            raise ValueError(f"line {line_no}: missing tokens or source_tags")
        sentences.append(
            TaggedSentence(
                tokens=list(obj["tokens"]),
                source_tags=list(obj["source_tags"]),
                scores=obj.get("scores"),
            )
        )
    return sentences


# ---------------------------------------------------------------------------
# Span-level precision/recall over predicted vs gold frames.


@dataclass
class SlotScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def zero_prediction(self) -> bool:
        # Precision is undefined with no predictions; reported as 0 + flag.
        return (self.tp + self.fp) == 0


@dataclass
class FrameEvalReport:
    per_slot: dict[str, SlotScore] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        slots = list(self.per_slot.values())
        return sum(s.precision for s in slots) / len(slots) if slots else 0.0

    @property
    def recall(self) -> float:
        slots = list(self.per_slot.values())
        return sum(s.recall for s in slots) / len(slots) if slots else 0.0


def evaluate_frames(
    predicted: Sequence[SemanticFrame], gold: Sequence[SemanticFrame]
) -> FrameEvalReport:
    """Exact-span matching per slot, macro-averaged over slots present in gold."""
    if len(predicted) != len(gold):
        raise ValueError(
            f"length mismatch: {len(predicted)} predicted vs {len(gold)} gold frames"
        )
    gold_slots = {slot for frame in gold for slot in frame.filled_slots()}
    report = FrameEvalReport(
        per_slot={slot: SlotScore() for slot in SLOT_NAMES if slot in gold_slots}
    )
    for pred_frame, gold_frame in zip(predicted, gold):
        for slot, score in report.per_slot.items():
            pred_spans = list(pred_frame.slots.get(slot, []))
            gold_spans = list(gold_frame.slots.get(slot, []))
            matched = 0
            remaining = list(gold_spans)
            for span in pred_spans:
                if span in remaining:
                    remaining.remove(span)
                    matched += 1
            score.tp += matched
            score.fp += len(pred_spans) - matched
            score.fn += len(gold_spans) - matched
    return report
