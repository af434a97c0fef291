"""Core task-document types shared by every other module.

A task is described by a ``Spec``: an ordered list of ``SpecItem`` steps,
each with one ``SemanticFrame`` and optionally a list of ``AtomicAction``
children.  Streaming inputs are ``TranscriptChunk`` (narrated text) and
``EmbeddingStream`` (timestamped fixed-dimension vectors).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping

import numpy as np

# Closed slot set for semantic frames.  The order doubles as the fixed
# priority order used when ranking missing slots and question suggestions.
SLOT_NAMES: tuple[str, ...] = (
    "Action",
    "Tool",
    "Receiver",
    "Location",
    "Temporal",
    "Direction",
    "Manner",
    "Extent",
    "Purpose",
    "Note",
)

_SLOT_SET = frozenset(SLOT_NAMES)


class SpecFormatError(ValueError):
    """A spec document violated the schema or a structural invariant."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise SpecFormatError(message)


@dataclass
class SemanticFrame:
    """Action-centric frame: a map from slot name to a list of text spans.

    A slot is "filled" iff it has at least one span; empty span lists are
    normalized away so presence of a key always means presence of a span.
    """

    slots: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cleaned: dict[str, list[str]] = {}
        for slot, spans in self.slots.items():
            if slot not in _SLOT_SET:
                raise SpecFormatError(f"unknown slot name: {slot!r}")
            if not isinstance(spans, (list, tuple)) or not all(
                isinstance(s, str) for s in spans
            ):
                raise SpecFormatError(f"slot {slot!r} spans must be a list of strings")
            if spans:
                cleaned[slot] = list(spans)
        self.slots = cleaned

    def has_slot(self, slot: str) -> bool:
        return slot in self.slots

    def filled_slots(self) -> frozenset[str]:
        return frozenset(self.slots)

    def first(self, slot: str) -> str | None:
        spans = self.slots.get(slot)
        return spans[0] if spans else None

    def add_span(self, slot: str, span: str) -> bool:
        """Add a span, de-duplicated; returns True if the frame changed."""
        if slot not in _SLOT_SET:
            raise SpecFormatError(f"unknown slot name: {slot!r}")
        if not span:
            return False
        spans = self.slots.setdefault(slot, [])
        if span in spans:
            return False
        spans.append(span)
        return True

    def is_complete_for(self, required: Iterable[str]) -> bool:
        return all(self.has_slot(slot) for slot in required)

    def copy(self) -> "SemanticFrame":
        return SemanticFrame({slot: list(spans) for slot, spans in self.slots.items()})

    def to_dict(self) -> dict[str, list[str]]:
        # Canonical slot order keeps serialized frames byte-stable.
        return {s: list(self.slots[s]) for s in SLOT_NAMES if s in self.slots}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SemanticFrame":
        if not isinstance(data, Mapping):
            raise SpecFormatError("frame must be an object mapping slots to span lists")
        return cls({str(k): v for k, v in data.items()})


def frame_missing_slots(
    frame: SemanticFrame, required: Iterable[str]
) -> tuple[str, ...]:
    """Slots from ``required`` that have no span in ``frame``, in priority order."""
    required_set = set(required)
    unknown = required_set - _SLOT_SET
    if unknown:
        raise SpecFormatError(f"unknown slot name: {sorted(unknown)[0]!r}")
    return tuple(
        s for s in SLOT_NAMES if s in required_set and not frame.has_slot(s)
    )


@dataclass
class AtomicAction:
    """A short imperative step inside a spec item.

    ``optional`` marks steps that may be skipped; actions sharing a ``group``
    label are interchangeable with each other within their spec item.
    """

    index: int
    text: str
    frame: SemanticFrame = field(default_factory=SemanticFrame)
    optional: bool = False
    group: str | None = None

    def __post_init__(self) -> None:
        _require(isinstance(self.index, int) and self.index >= 0,
                 f"action index must be a non-negative integer, got {self.index!r}")
        _require(isinstance(self.text, str) and bool(self.text.strip()),
                 f"action {self.index} needs non-empty text")
        _require(self.frame.has_slot("Action"),
                 f"action {self.index} frame must fill the Action slot")


@dataclass
class SpecItem:
    index: int
    text: str
    frame: SemanticFrame = field(default_factory=SemanticFrame)
    actions: list[AtomicAction] = field(default_factory=list)
    image_ref: str | None = None

    def __post_init__(self) -> None:
        _require(isinstance(self.index, int) and self.index >= 0,
                 f"item index must be a non-negative integer, got {self.index!r}")
        _require(isinstance(self.text, str), "item text must be a string")
        if not self.actions:
            _require(bool(self.text.strip()),
                     f"item {self.index} needs text when it has no actions")
        _require(self.frame.has_slot("Action"),
                 f"item {self.index} frame must fill the Action slot")
        indices = [a.index for a in self.actions]
        _require(indices == list(range(len(indices))),
                 f"item {self.index} has non-contiguous or unordered action indices: {indices}")


@dataclass
class Spec:
    spec_id: str
    title: str
    items: list[SpecItem]

    def __post_init__(self) -> None:
        _require(isinstance(self.spec_id, str) and bool(self.spec_id),
                 "spec_id must be a non-empty string")
        _require(isinstance(self.title, str), "title must be a string")
        _require(bool(self.items), "empty items list")
        indices = [item.index for item in self.items]
        seen: set[int] = set()
        for idx in indices:
            _require(idx not in seen, f"duplicate item index: {idx}")
            seen.add(idx)
        _require(indices == list(range(len(indices))),
                 f"non-contiguous or unordered indices: {indices}")

    def item(self, index: int) -> SpecItem:
        return self.items[index]

    def __len__(self) -> int:
        return len(self.items)


def _parse_frame(obj: Any, where: str) -> SemanticFrame:
    if not isinstance(obj, Mapping):
        raise SpecFormatError(f"{where}: frame must be an object")
    return SemanticFrame.from_dict(obj)


def _parse_action(obj: Any, where: str) -> AtomicAction:
    if not isinstance(obj, Mapping):
        raise SpecFormatError(f"{where}: action must be an object")
    for name in ("index", "text", "frame"):
        _require(name in obj, f"{where}: action missing field {name!r}")
    return AtomicAction(
        index=obj["index"],
        text=obj["text"],
        frame=_parse_frame(obj["frame"], where),
        optional=bool(obj.get("optional", False)),
        group=obj.get("group"),
    )


def _parse_item(obj: Any) -> SpecItem:
    if not isinstance(obj, Mapping):
        raise SpecFormatError("item must be an object")
    for name in ("index", "text", "frame", "actions"):
        _require(name in obj, f"item missing field {name!r}")
    where = f"item {obj['index']!r}"
    actions_obj = obj["actions"]
    _require(isinstance(actions_obj, list), f"{where}: actions must be a list")
    return SpecItem(
        index=obj["index"],
        text=obj["text"],
        frame=_parse_frame(obj["frame"], where),
        actions=[_parse_action(a, where) for a in actions_obj],
        image_ref=obj.get("image_ref"),
    )


def load_spec(document: bytes | str | Mapping[str, Any]) -> Spec:
    """Parse and validate a spec document (JSON text, bytes, or a mapping)."""
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            data = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecFormatError(f"malformed document: {exc}") from exc
    elif isinstance(document, Mapping):
        data = document
    else:
        raise SpecFormatError("spec document must be JSON text or a mapping")

    _require(isinstance(data, Mapping), "spec document must be a JSON object")
    for name in ("spec_id", "title", "items"):
        _require(name in data, f"document missing field {name!r}")
    items_obj = data["items"]
    _require(isinstance(items_obj, list), "items must be a list")
    return Spec(
        spec_id=data["spec_id"],
        title=data["title"],
        items=[_parse_item(obj) for obj in items_obj],
    )


def spec_to_document(spec: Spec) -> dict[str, Any]:
    """The plain-JSON form of a spec, matching the document schema exactly."""
    return {
        "spec_id": spec.spec_id,
        "title": spec.title,
        "items": [
            {
                "index": item.index,
                "text": item.text,
                **({"image_ref": item.image_ref} if item.image_ref is not None else {}),
                "frame": item.frame.to_dict(),
                "actions": [
                    {
                        "index": a.index,
                        "text": a.text,
                        "frame": a.frame.to_dict(),
                        "optional": a.optional,
                        **({"group": a.group} if a.group is not None else {}),
                    }
                    for a in item.actions
                ],
            }
            for item in spec.items
        ],
    }


def serialize_spec(spec: Spec) -> str:
    """Serialize so that ``load_spec(serialize_spec(s))`` equals ``s``."""
    return json.dumps(spec_to_document(spec), ensure_ascii=False, indent=2) + "\n"


@dataclass(frozen=True)
class TranscriptChunk:
    """One chunk of recognized speech, with session-relative extent."""

    chunk_index: int
    text: str
    start_ms: int
    end_ms: int

    def __post_init__(self) -> None:
        if self.chunk_index < 0:
            raise ValueError(f"chunk_index must be non-negative, got {self.chunk_index}")
        if self.start_ms > self.end_ms:
            raise ValueError(
                f"chunk {self.chunk_index}: start_ms {self.start_ms} exceeds end_ms {self.end_ms}"
            )


def validate_chunk_sequence(chunks: Iterable[TranscriptChunk]) -> None:
    """Chunk indices must strictly increase together with start times."""
    prev: TranscriptChunk | None = None
    for chunk in chunks:
        if prev is not None:
            if chunk.chunk_index <= prev.chunk_index:
                raise ValueError(
                    f"chunk_index must strictly increase: {prev.chunk_index} then {chunk.chunk_index}"
                )
            if chunk.start_ms < prev.start_ms:
                raise ValueError(
                    f"chunk start_ms must not decrease: {prev.start_ms} then {chunk.start_ms}"
                )
        prev = chunk


@dataclass
class EmbeddingStream:
    """Timestamped fixed-dimension vectors, strictly ordered in time."""

    timestamps_ms: np.ndarray
    vectors: np.ndarray
    cadence_ms: int | None = None
    source: str | None = None

    def __post_init__(self) -> None:
        self.timestamps_ms = np.asarray(self.timestamps_ms, dtype=np.int64)
        self.vectors = np.asarray(self.vectors)
        if self.timestamps_ms.ndim != 1 or self.vectors.ndim != 2:
            raise ValueError("timestamps must be 1-d and vectors 2-d")
        if self.timestamps_ms.shape[0] != self.vectors.shape[0]:
            raise ValueError(
                f"row count mismatch: {self.timestamps_ms.shape[0]} timestamps, "
                f"{self.vectors.shape[0]} vectors"
            )
        if self.vectors.shape[1] <= 0:
            raise ValueError("dim must be positive")
        if len(self.timestamps_ms) > 1 and not np.all(np.diff(self.timestamps_ms) > 0):
            raise ValueError("non-monotone timestamps")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("non-finite vector")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.timestamps_ms.shape[0])

    def entries(self) -> Iterator[tuple[int, np.ndarray]]:
        for i in range(len(self)):
            yield int(self.timestamps_ms[i]), self.vectors[i]
