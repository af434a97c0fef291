"""Wizard-of-oz session engine.

Every session is an append-only, densely-sequenced event log.  External
inputs (narration chunks, frame embeddings, wizard actions, connections) are
recorded as events; everything the system derives from them (estimates,
frame updates, question suggestions, speech requests) is appended as
system-actor events in the same sequence.  Replaying the external events of a
recorded log through a fresh session reproduces the derived events exactly.

The engine never speaks to the performer on its own: every tts-request is
caused by one wizard action or one configured auto-prompt.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from taskguide.frames import frames_from_text
from taskguide.matcher import MatchState
from taskguide.embeddings import fallback_embed_text
from taskguide.model import (
    SLOT_NAMES,
    SemanticFrame,
    Spec,
    TranscriptChunk,
    frame_missing_slots,
    load_spec,
    spec_to_document,
)
from taskguide.questions import DEFAULT_TEMPLATES, load_template_catalog, suggest_questions
from taskguide.tcn import CausalTcnModel, OnlineTcnState

MODES = ("post-hoc", "during", "guidance")

EVENT_KINDS = (
    "narration-chunk",
    "wizard-utterance",
    "question-suggested",
    "question-asked",
    "video-control",
    "spec-estimate",
    "action-estimate",
    "frame-update",
    "tts-request",
    "note",
)

ACTORS = ("wizard", "performer", "system")

VIDEO_COMMANDS = ("play", "pause", "rewind", "forward", "loop", "zoom")

DEFAULT_UTTERANCES: dict[str, str] = {
    "prompt-narrate": "Please describe what you are doing.",
    "prompt-continue": "Please continue with the next step.",
    "ack-ok": "Okay, thank you.",
}

_PAYLOAD_KEYS: dict[str, frozenset[str]] = {
    "narration-chunk": frozenset({"chunk_index", "text", "start_ms", "end_ms"}),
    "wizard-utterance": frozenset({"utterance_id", "text"}),
    "question-suggested": frozenset({"questions", "missing"}),
    "question-asked": frozenset({"text", "slot", "provenance", "edited"}),
    "video-control": frozenset({"cmd"}),
    "spec-estimate": frozenset({"item", "score", "scores"}),
    "action-estimate": frozenset({"label", "probs"}),
    "frame-update": frozenset({"slots", "missing"}),
    "tts-request": frozenset({"text", "source", "source_seq"}),
}

_NOTE_KEYS: dict[str, frozenset[str]] = {
    "participant-connected": frozenset({"role"}),
    "participant-disconnected": frozenset({"role"}),
    "frame-embedding": frozenset({"vector"}),
    "confirm-item": frozenset({"item"}),
    "correction": frozenset({"text"}),
}


class SessionError(ValueError):
    """A session operation violated a precondition or an event invariant."""


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    t_ms: int
    kind: str
    actor: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "t_ms": self.t_ms,
            "kind": self.kind,
            "actor": self.actor,
            "payload": self.payload,
        }

    def to_line(self) -> str:
        """Canonical single-line JSON; equality of lines is event equality."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SessionEvent":
        event = cls(
            seq=int(data["seq"]),
            t_ms=int(data["t_ms"]),
            kind=data["kind"],
            actor=data["actor"],
            payload=dict(data["payload"]),
        )
        validate_event(event)
        return event


def validate_event(event: SessionEvent) -> None:
    if event.kind not in EVENT_KINDS:
        raise SessionError(f"unknown event kind: {event.kind!r}")
    if event.actor not in ACTORS:
        raise SessionError(f"unknown actor: {event.actor!r}")
    if event.seq < 0:
        raise SessionError(f"seq must be non-negative, got {event.seq}")
    if event.kind == "note":
        note_type = event.payload.get("note_type")
        if note_type not in _NOTE_KEYS:
            raise SessionError(f"unknown note type: {note_type!r}")
        expected = _NOTE_KEYS[note_type] | {"note_type"}
    else:
        expected = _PAYLOAD_KEYS[event.kind]
    actual = frozenset(event.payload)
    if actual != expected:
        raise SessionError(
            f"{event.kind} payload keys {sorted(actual)} != expected {sorted(expected)}"
        )


def _jsonable(value: Any) -> Any:
    """Coerce numpy scalars/arrays so payloads serialize canonically."""
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


@dataclass
class SessionConfig:
    """Per-session knobs; the snapshot stored in a log header inlines the
    catalogs so a log replays without any external files."""

    window_ms: int = 6000
    cadence_ms: int = 1000
    encoder_dim: int = 64
    required_slots: tuple[str, ...] = ("Action", "Tool", "Receiver")
    utterance_catalog: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_UTTERANCES)
    )
    templates: dict[str, dict[str, str]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_TEMPLATES.items()}
    )
    auto_prompts: tuple[str, ...] = ()
    suggestion_limit: int = 3

    def __post_init__(self) -> None:
        if self.window_ms <= 0 or self.cadence_ms <= 0:
            raise SessionError("window_ms and cadence_ms must be positive")
        if self.encoder_dim < 1:
            raise SessionError("encoder_dim must be positive")
        self.required_slots = tuple(self.required_slots)
        for slot in self.required_slots:
            if slot not in SLOT_NAMES:
                raise SessionError(f"unknown slot name: {slot!r}")
        if self.suggestion_limit < 1:
            raise SessionError("suggestion_limit must be >= 1")
        self.auto_prompts = tuple(self.auto_prompts)

    def snapshot(self) -> dict[str, Any]:
        return {
            "window_ms": self.window_ms,
            "cadence_ms": self.cadence_ms,
            "encoder_dim": self.encoder_dim,
            "required_slots": list(self.required_slots),
            "utterance_catalog": dict(self.utterance_catalog),
            "templates": {k: dict(v) for k, v in self.templates.items()},
            "auto_prompts": list(self.auto_prompts),
            "suggestion_limit": self.suggestion_limit,
        }

    @classmethod
    def from_snapshot(cls, data: Mapping[str, Any]) -> "SessionConfig":
        return cls(
            window_ms=data["window_ms"],
            cadence_ms=data["cadence_ms"],
            encoder_dim=data["encoder_dim"],
            required_slots=tuple(data["required_slots"]),
            utterance_catalog=dict(data["utterance_catalog"]),
            templates={k: dict(v) for k, v in data["templates"].items()},
            auto_prompts=tuple(data.get("auto_prompts", ())),
            suggestion_limit=data.get("suggestion_limit", 3),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SessionConfig":
        """Keys: window_ms, cadence_ms, encoder_dim, required_slots,
        utterance_catalog (path), template_catalog (path)."""
        path = Path(path)
        data = json.loads(path.read_text())
        kwargs: dict[str, Any] = {}
        for key in ("window_ms", "cadence_ms", "encoder_dim"):
            if key in data:
                kwargs[key] = data[key]
        if "required_slots" in data:
            kwargs["required_slots"] = tuple(data["required_slots"])
        if "utterance_catalog" in data:
            catalog_path = path.parent / data["utterance_catalog"]
            kwargs["utterance_catalog"] = dict(json.loads(catalog_path.read_text()))
        if "template_catalog" in data:
            kwargs["templates"] = load_template_catalog(path.parent / data["template_catalog"])
        return cls(**kwargs)


@dataclass(frozen=True)
class WizardAction:
    kind: str
    utterance_id: Optional[str] = None
    text: Optional[str] = None
    slot: Optional[str] = None
    provenance: Optional[str] = None
    command: Optional[str] = None
    item: Optional[int] = None

    @classmethod
    def select_utterance(cls, utterance_id: str) -> "WizardAction":
        return cls(kind="select-utterance", utterance_id=utterance_id)

    @classmethod
    def free_text(cls, text: str) -> "WizardAction":
        return cls(kind="free-text", text=text)

    @classmethod
    def ask_question(
        cls, text: str, slot: Optional[str] = None, provenance: str = "manual"
    ) -> "WizardAction":
        return cls(kind="ask-question", text=text, slot=slot, provenance=provenance)

    @classmethod
    def edit_question(
        cls, provenance: str, text: str, slot: Optional[str] = None
    ) -> "WizardAction":
        return cls(kind="edit-question", text=text, slot=slot, provenance=provenance)

    @classmethod
    def video_control(cls, command: str) -> "WizardAction":
        return cls(kind="video-control", command=command)

    @classmethod
    def confirm_item(cls, item: int) -> "WizardAction":
        return cls(kind="confirm-item", item=item)

    @classmethod
    def note(cls, text: str) -> "WizardAction":
        return cls(kind="note", text=text)


# Wizard action kinds whose result is spoken to the performer.
SPEECH_ACTION_KINDS = frozenset(
    {"select-utterance", "free-text", "ask-question", "edit-question"}
)


@dataclass
class SessionLog:
    header: dict[str, Any]
    events: list[SessionEvent] = field(default_factory=list)

    def derived_events(self) -> list[SessionEvent]:
        return [e for e in self.events if e.actor == "system"]

    def external_events(self) -> list[SessionEvent]:
        return [e for e in self.events if e.actor != "system"]

    def validate_dense(self) -> None:
        for i, event in enumerate(self.events):
            if event.seq != i:
                raise SessionError(
                    f"seq gap: event at position {i} has seq {event.seq}"
                )


class Session:
    """One wizard/performer interaction; all mutation funnels through
    ``_append`` which sequences, validates, persists, then broadcasts."""

    def __init__(
        self,
        session_id: str,
        mode: str,
        spec: Spec,
        config: SessionConfig,
        item_vectors: Optional[np.ndarray] = None,
        segmenter_model: Optional[CausalTcnModel] = None,
        sink: Optional[Callable[[SessionEvent], None]] = None,
    ) -> None:
        if mode not in MODES:
            raise SessionError(f"invalid mode: {mode!r}")
        self.session_id = session_id
        self.mode = mode
        self.spec = spec
        self.config = config
        if item_vectors is None:
            item_vectors = np.stack(
                [fallback_embed_text(item.text, config.encoder_dim) for item in spec.items]
            )
        self.match_state = MatchState(spec, item_vectors, window_ms=config.window_ms)
        self.segmenter: Optional[OnlineTcnState] = None
        if segmenter_model is not None:
            if segmenter_model.config.input_dim != config.encoder_dim:
                raise SessionError(
                    f"segmenter input dim {segmenter_model.config.input_dim} "
                    f"!= encoder dim {config.encoder_dim}"
                )
            self.segmenter = OnlineTcnState(segmenter_model)
        self.frame_accumulator = SemanticFrame()
        self.participants: dict[str, bool] = {"wizard": False, "performer": False}
        self.active = True
        self.lock = threading.Lock()
        self.listeners: list[Callable[[SessionEvent], None]] = []
        self._sink = sink
        self._last_chunk_index: Optional[int] = None
        self._last_estimate_item: Optional[int] = None
        self._last_estimate_t: Optional[int] = None
        self._last_action_label: Optional[int] = None
        self._last_action_t: Optional[int] = None
        self._created_monotonic = time.monotonic()
        self.log = SessionLog(
            header={
                "session_id": session_id,
                "mode": mode,
                "spec_id": spec.spec_id,
                "spec": spec_to_document(spec),
                "config": config.snapshot(),
                "created_utc": datetime.now(timezone.utc).isoformat(),
            }
        )
        for text in config.auto_prompts:
            self._append(
                "tts-request",
                0,
                "system",
                {"text": text, "source": "auto-prompt", "source_seq": None},
            )

    # -- plumbing -----------------------------------------------------------

    def server_now_ms(self) -> int:
        elapsed = int((time.monotonic() - self._created_monotonic) * 1000)
        last = self.log.events[-1].t_ms if self.log.events else 0
        return max(elapsed, last)

    def _append(self, kind: str, t_ms: int, actor: str, payload: dict) -> SessionEvent:
        if self.log.events and t_ms < self.log.events[-1].t_ms:
            raise SessionError(
                f"event timestamps must be non-decreasing: {t_ms} after "
                f"{self.log.events[-1].t_ms}"
            )
        event = SessionEvent(
            seq=len(self.log.events),
            t_ms=int(t_ms),
            kind=kind,
            actor=actor,
            payload=_jsonable(payload),
        )
        validate_event(event)
        self.log.events.append(event)
        if self._sink is not None:
            self._sink(event)  # durable before anyone else sees it
        for listener in list(self.listeners):
            listener(event)
        return event

    def _require_active(self) -> None:
        if not self.active:
            raise SessionError("inactive session")

    def close(self) -> None:
        self.active = False

    # -- participants -------------------------------------------------------

    def connect(self, role: str, t_ms: Optional[int] = None) -> SessionEvent:
        if role not in ("wizard", "performer"):
            raise SessionError(f"unknown role: {role!r}")
        if self.participants[role]:
            raise SessionError(f"role already occupied: {role}")
        self.participants[role] = True
        t = self.server_now_ms() if t_ms is None else t_ms
        return self._append(
            "note", t, role, {"note_type": "participant-connected", "role": role}
        )

    def disconnect(self, role: str, t_ms: Optional[int] = None) -> SessionEvent:
        if role not in ("wizard", "performer"):
            raise SessionError(f"unknown role: {role!r}")
        if not self.participants[role]:
            raise SessionError(f"role not connected: {role}")
        self.participants[role] = False
        t = self.server_now_ms() if t_ms is None else t_ms
        return self._append(
            "note", t, role, {"note_type": "participant-disconnected", "role": role}
        )

    # -- external inputs ----------------------------------------------------

    def ingest_narration(self, chunk: TranscriptChunk) -> list[SessionEvent]:
        """Record a narration chunk and derive frame/question events from it."""
        self._require_active()
        if self._last_chunk_index is not None and chunk.chunk_index <= self._last_chunk_index:
            raise SessionError(
                f"chunk_index must strictly increase: {self._last_chunk_index} "
                f"then {chunk.chunk_index}"
            )
        emitted = [
            self._append(
                "narration-chunk",
                chunk.end_ms,
                "performer",
                {
                    "chunk_index": chunk.chunk_index,
                    "text": chunk.text,
                    "start_ms": chunk.start_ms,
                    "end_ms": chunk.end_ms,
                },
            )
        ]
        self._last_chunk_index = chunk.chunk_index
        if not chunk.text.strip():
            return emitted

        extraction = frames_from_text(chunk.text)
        extracted_any = False
        for frame in extraction.frames:
            for slot, spans in frame.slots.items():
                for span in spans:
                    self.frame_accumulator.add_span(slot, span)
                    extracted_any = True
        if not extracted_any:
            return emitted

        missing = frame_missing_slots(self.frame_accumulator, self.config.required_slots)
        emitted.append(
            self._append(
                "frame-update",
                chunk.end_ms,
                "system",
                {"slots": self.frame_accumulator.to_dict(), "missing": list(missing)},
            )
        )
        if missing:
            suggestions = suggest_questions(
                self.frame_accumulator,
                self.config.required_slots,
                self.config.suggestion_limit,
                self.config.templates,
            )
            emitted.append(
                self._append(
                    "question-suggested",
                    chunk.end_ms,
                    "system",
                    {
                        "questions": [
                            {
                                "text": q.text,
                                "template_id": q.template_id,
                                "slot": q.slot,
                                "requested_slot": q.requested_slot,
                                "fallback": q.fallback,
                            }
                            for q in suggestions
                        ],
                        "missing": list(missing),
                    },
                )
            )
        return emitted

    def ingest_frame_embedding(
        self, t_ms: int, vector: Sequence[float]
    ) -> list[SessionEvent]:
        """Record one frame vector; emit estimates on change or on cadence."""
        self._require_active()
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1 or vector.shape[0] != self.match_state.dim:
            raise SessionError(
                f"dimension mismatch: got {vector.shape}, expected ({self.match_state.dim},)"
            )
        history = self.match_state.history()
        if history and t_ms <= history[-1][0]:
            raise SessionError(
                f"out-of-order timestamp: {t_ms} after {history[-1][0]}"
            )
        emitted = [
            self._append(
                "note",
                t_ms,
                "performer",
                {"note_type": "frame-embedding", "vector": vector},
            )
        ]
        estimate = self.match_state.observe(t_ms, vector)
        due = (
            self._last_estimate_item is None
            or estimate.item != self._last_estimate_item
            or t_ms - (self._last_estimate_t or 0) >= self.config.cadence_ms
        )
        if due:
            emitted.append(
                self._append(
                    "spec-estimate",
                    t_ms,
                    "system",
                    {
                        "item": estimate.item,
                        "score": estimate.score,
                        "scores": estimate.per_item,
                    },
                )
            )
            self._last_estimate_item = estimate.item
            self._last_estimate_t = t_ms

        if self.segmenter is not None:
            label, probs = self.segmenter.step(vector)
            action_due = (
                self._last_action_label is None
                or label != self._last_action_label
                or t_ms - (self._last_action_t or 0) >= self.config.cadence_ms
            )
            if action_due:
                emitted.append(
                    self._append(
                        "action-estimate",
                        t_ms,
                        "system",
                        {"label": label, "probs": probs},
                    )
                )
                self._last_action_label = label
                self._last_action_t = t_ms
        return emitted

    # -- wizard actions -----------------------------------------------------

    def wizard_act(self, t_ms: int, action: WizardAction) -> list[SessionEvent]:
        self._require_active()
        if not self.participants["wizard"]:
            raise SessionError("wizard not connected")

        def speak(text: str, source_seq: int) -> SessionEvent:
            return self._append(
                "tts-request",
                t_ms,
                "system",
                {"text": text, "source": "wizard", "source_seq": source_seq},
            )

        kind = action.kind
        if kind == "select-utterance":
            if action.utterance_id not in self.config.utterance_catalog:
                raise SessionError(f"unknown utterance id: {action.utterance_id!r}")
            text = self.config.utterance_catalog[action.utterance_id]
            event = self._append(
                "wizard-utterance",
                t_ms,
                "wizard",
                {"utterance_id": action.utterance_id, "text": text},
            )
            return [event, speak(text, event.seq)]
        if kind == "free-text":
            if not action.text or not action.text.strip():
                raise SessionError("free-text action needs text")
            event = self._append(
                "wizard-utterance",
                t_ms,
                "wizard",
                {"utterance_id": None, "text": action.text},
            )
            return [event, speak(action.text, event.seq)]
        if kind in ("ask-question", "edit-question"):
            if not action.text or not action.text.strip():
                raise SessionError("question action needs text")
            if action.slot is not None and action.slot not in SLOT_NAMES:
                raise SessionError(f"unknown slot name: {action.slot!r}")
            if kind == "edit-question" and not action.provenance:
                raise SessionError("edit-question needs the originating template id")
            event = self._append(
                "question-asked",
                t_ms,
                "wizard",
                {
                    "text": action.text,
                    "slot": action.slot,
                    "provenance": action.provenance or "manual",
                    "edited": kind == "edit-question",
                },
            )
            return [event, speak(action.text, event.seq)]
        if kind == "video-control":
            if action.command not in VIDEO_COMMANDS:
                raise SessionError(f"invalid command: {action.command!r}")
            return [
                self._append("video-control", t_ms, "wizard", {"cmd": action.command})
            ]
        if kind == "confirm-item":
            if action.item is None or not (0 <= action.item < len(self.spec.items)):
                raise SessionError(f"item index out of range: {action.item!r}")
            note = self._append(
                "note",
                t_ms,
                "wizard",
                {"note_type": "confirm-item", "item": action.item},
            )
            self.frame_accumulator = SemanticFrame()
            update = self._append(
                "frame-update",
                t_ms,
                "system",
                {"slots": {}, "missing": list(self.config.required_slots)},
            )
            return [note, update]
        if kind == "note":
            if not action.text:
                raise SessionError("note action needs text")
            return [
                self._append(
                    "note",
                    t_ms,
                    "wizard",
                    {"note_type": "correction", "text": action.text},
                )
            ]
        raise SessionError(f"unknown wizard action: {kind!r}")


def event_visible_to(event: SessionEvent, role: str, mode: str) -> bool:
    """Per-role event filtering for the message channel.

    The wizard sees everything.  The performer sees the conversation and
    player control; model internals (frame updates, suggestions) stay on the
    wizard side, and estimates reach the performer only in guidance mode.
    """
    if role == "wizard":
        return True
    if event.kind in (
        "narration-chunk",
        "wizard-utterance",
        "question-asked",
        "video-control",
        "tts-request",
    ):
        return True
    if event.kind in ("spec-estimate", "action-estimate"):
        return mode == "guidance"
    if event.kind == "note":
        return event.payload.get("note_type") in (
            "participant-connected",
            "participant-disconnected",
        )
    return False


class SessionStore:
    """One JSONL event file plus one JSON header file per session."""

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._handles: dict[str, Any] = {}

    def header_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.header.json"

    def events_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.events.jsonl"

    def attach(self, session: Session) -> None:
        self.header_path(session.session_id).write_text(
            json.dumps(session.log.header, sort_keys=True, indent=2) + "\n"
        )
        handle = open(self.events_path(session.session_id), "a", encoding="utf-8")
        self._handles[session.session_id] = handle

        def sink(event: SessionEvent) -> None:
            handle.write(event.to_line() + "\n")
            handle.flush()

        session._sink = sink
        for event in session.log.events:  # auto-prompts emitted before attach
            sink(event)

    def close(self, session_id: str) -> None:
        handle = self._handles.pop(session_id, None)
        if handle is not None:
            handle.close()

    def close_all(self) -> None:
        for session_id in list(self._handles):
            self.close(session_id)

    def list_sessions(self) -> list[str]:
        return sorted(p.name[: -len(".header.json")] for p in self.root.glob("*.header.json"))

    def load(self, session_id: str) -> SessionLog:
        header = json.loads(self.header_path(session_id).read_text())
        events = []
        events_path = self.events_path(session_id)
        if events_path.exists():
            for line in events_path.read_text().splitlines():
                if line.strip():
                    events.append(SessionEvent.from_dict(json.loads(line)))
        log = SessionLog(header=header, events=events)
        log.validate_dense()
        return log


class SessionEngine:
    """Registry of loaded specs and live sessions."""

    def __init__(self, store: Optional[SessionStore] = None) -> None:
        self.specs: dict[str, Spec] = {}
        self.sessions: dict[str, Session] = {}
        self.store = store
        self._lock = threading.Lock()

    def add_spec(self, spec: Spec) -> Spec:
        with self._lock:
            if spec.spec_id in self.specs:
                raise SessionError(f"duplicate spec_id: {spec.spec_id!r}")
            self.specs[spec.spec_id] = spec
        return spec

    def load_spec_document(self, document: Union[bytes, str, Mapping]) -> Spec:
        return self.add_spec(load_spec(document))

    def get_spec(self, spec_id: str) -> Spec:
        if spec_id not in self.specs:
            raise SessionError(f"unknown spec: {spec_id!r}")
        return self.specs[spec_id]

    def create_session(
        self,
        mode: str,
        spec_id: str,
        config: Optional[SessionConfig] = None,
        item_vectors: Optional[np.ndarray] = None,
        segmenter_model: Optional[CausalTcnModel] = None,
    ) -> Session:
        if mode not in MODES:
            raise SessionError(f"invalid mode: {mode!r}")
        spec = self.get_spec(spec_id)
        session = Session(
            session_id=uuid.uuid4().hex,
            mode=mode,
            spec=spec,
            config=config or SessionConfig(),
            item_vectors=item_vectors,
            segmenter_model=segmenter_model,
        )
        with self._lock:
            self.sessions[session.session_id] = session
        if self.store is not None:
            self.store.attach(session)
        return session

    def get_session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise SessionError(f"unknown session: {session_id!r}")
        return self.sessions[session_id]

    def replay_log(
        self,
        log: SessionLog,
        segmenter_model: Optional[CausalTcnModel] = None,
    ) -> list[SessionEvent]:
        """Re-drive the log's external events through a fresh session and
        return the system-derived events that produces."""
        log.validate_dense()
        header = log.header
        spec = load_spec(header["spec"])
        config = SessionConfig.from_snapshot(header["config"])
        session = Session(
            session_id=f"replay-{header.get('session_id', 'unknown')}",
            mode=header["mode"],
            spec=spec,
            config=config,
            segmenter_model=segmenter_model,
        )
        for event in log.events:
            if event.actor == "system":
                continue
            self._redrive(session, event)
        return session.log.derived_events()

    @staticmethod
    def _redrive(session: Session, event: SessionEvent) -> None:
        payload = event.payload
        kind = event.kind
        if kind == "narration-chunk":
            session.ingest_narration(
                TranscriptChunk(
                    chunk_index=payload["chunk_index"],
                    text=payload["text"],
                    start_ms=payload["start_ms"],
                    end_ms=payload["end_ms"],
                )
            )
        elif kind == "note":
            note_type = payload["note_type"]
            if note_type == "participant-connected":
                session.connect(payload["role"], t_ms=event.t_ms)
            elif note_type == "participant-disconnected":
                session.disconnect(payload["role"], t_ms=event.t_ms)
            elif note_type == "frame-embedding":
                session.ingest_frame_embedding(
                    event.t_ms, np.asarray(payload["vector"], dtype=np.float64)
                )
            elif note_type == "confirm-item":
                session.wizard_act(event.t_ms, WizardAction.confirm_item(payload["item"]))
            elif note_type == "correction":
                session.wizard_act(event.t_ms, WizardAction.note(payload["text"]))
            else:
                raise SessionError(f"unknown note type: {note_type!r}")
        elif kind == "wizard-utterance":
            if payload["utterance_id"] is not None:
                action = WizardAction.select_utterance(payload["utterance_id"])
            else:
                action = WizardAction.free_text(payload["text"])
            session.wizard_act(event.t_ms, action)
        elif kind == "question-asked":
            if payload["edited"]:
                action = WizardAction.edit_question(
                    provenance=payload["provenance"],
                    text=payload["text"],
                    slot=payload["slot"],
                )
            else:
                action = WizardAction.ask_question(
                    text=payload["text"],
                    slot=payload["slot"],
                    provenance=payload["provenance"],
                )
            session.wizard_act(event.t_ms, action)
        elif kind == "video-control":
            session.wizard_act(event.t_ms, WizardAction.video_control(payload["cmd"]))
        else:
            raise SessionError(f"cannot re-drive event kind: {kind!r}")
