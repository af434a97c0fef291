"""Task-guidance engine.

A spec document describes a task as ordered items, each carrying a semantic
frame and optional atomic actions.  The engine estimates which item a
performer is currently working on from streamed embeddings or narration,
extracts frames from narrated text, suggests slot-targeted questions for a
human wizard, and records every session as a replayable event log.
"""

from taskguide.model import (
    AtomicAction,
    EmbeddingStream,
    SemanticFrame,
    Spec,
    SpecFormatError,
    SpecItem,
    TranscriptChunk,
    SLOT_NAMES,
    frame_missing_slots,
    load_spec,
    serialize_spec,
)

__version__ = "0.1.0"

__all__ = [
    "AtomicAction",
    "EmbeddingStream",
    "SemanticFrame",
    "Spec",
    "SpecFormatError",
    "SpecItem",
    "TranscriptChunk",
    "SLOT_NAMES",
    "frame_missing_slots",
    "load_spec",
    "serialize_spec",
    "__version__",
]
