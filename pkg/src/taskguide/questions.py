"""Slot-targeted question generation from fixed, editable templates.

One template per slot, keyed by a stable template id.  Patterns may splice in
the frame's first Action span ({action}) and first Receiver span ({receiver});
when the Action is unknown and something else is asked for, the generic
action question is asked first instead.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Union

from taskguide.model import SLOT_NAMES, SemanticFrame, frame_missing_slots

DEFAULT_TEMPLATES: dict[str, dict[str, str]] = {
    "Action": {"id": "Action-1", "pattern": "What are you doing right now?"},
    "Tool": {"id": "Tool-1", "pattern": "What are you using to {action} {receiver}?"},
    "Receiver": {"id": "Receiver-1", "pattern": "What exactly do you {action}?"},
    "Location": {"id": "Location-1", "pattern": "Where do you {action} {receiver}?"},
    "Temporal": {"id": "Temporal-1", "pattern": "When do you {action} {receiver}?"},
    "Direction": {
        "id": "Direction-1",
        "pattern": "In which direction do you {action} {receiver}?",
    },
    "Manner": {"id": "Manner-1", "pattern": "How do you {action} {receiver}?"},
    "Extent": {"id": "Extent-1", "pattern": "Until when do you {action}?"},
    "Purpose": {"id": "Purpose-1", "pattern": "Why do you {action} {receiver}?"},
    "Note": {
        "id": "Note-1",
        "pattern": "Is there anything else to keep in mind for this step?",
    },
}

MANUAL_PROVENANCE = "manual"


class TemplateCatalogError(ValueError):
    """The template catalog is missing slots or malformed."""


def load_template_catalog(
    source: Union[str, Path, Mapping[str, Mapping[str, str]]]
) -> dict[str, dict[str, str]]:
    """Load {slot -> {id, pattern}} from a JSON file or mapping, validated."""
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise TemplateCatalogError(f"malformed template catalog: {exc}") from exc
    else:
        data = {k: dict(v) for k, v in source.items()}
    if not isinstance(data, Mapping):
        raise TemplateCatalogError("template catalog must be an object")
    catalog: dict[str, dict[str, str]] = {}
    for slot, entry in data.items():
        if slot not in SLOT_NAMES:
            raise TemplateCatalogError(f"unknown slot name: {slot!r}")
        if not isinstance(entry, Mapping) or "id" not in entry or "pattern" not in entry:
            raise TemplateCatalogError(f"slot {slot!r} entry needs id and pattern")
        catalog[slot] = {"id": str(entry["id"]), "pattern": str(entry["pattern"])}
    missing = [slot for slot in SLOT_NAMES if slot not in catalog]
    if missing:
        raise TemplateCatalogError(f"template catalog missing slots: {missing}")
    return catalog


def write_template_catalog(path: Union[str, Path], catalog: Mapping | None = None) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(catalog or DEFAULT_TEMPLATES, indent=2, ensure_ascii=False) + "\n"
    )
    return path


@dataclass(frozen=True)
class QuestionPrompt:
    frame: SemanticFrame
    target_slot: str
    context_text: str | None = None
    confirm: bool = False  # allow asking about an already-filled slot

    def __post_init__(self) -> None:
        if self.target_slot not in SLOT_NAMES:
            raise ValueError(f"unknown slot name: {self.target_slot!r}")
        if self.frame.has_slot(self.target_slot) and not self.confirm:
            raise ValueError(
                f"slot {self.target_slot!r} is already filled; "
                "pass confirm=True for a confirmation question"
            )


@dataclass(frozen=True)
class GeneratedQuestion:
    text: str
    template_id: str
    slot: str  # the slot the question text actually asks about
    requested_slot: str  # the slot the caller wanted filled
    fallback: bool = False  # True when the generic action question replaced the request


def _instantiate(pattern: str, frame: SemanticFrame) -> str:
    action = frame.first("Action") or ""
    receiver = frame.first("Receiver") or ""
    text = pattern.format(action=action, receiver=receiver)
    text = re.sub(r"\s+", " ", text).strip()
    return re.sub(r"\s+([?.!,])", r"\1", text)


def generate_question(
    prompt: QuestionPrompt,
    catalog: Mapping[str, Mapping[str, str]] | None = None,
) -> GeneratedQuestion:
    """Deterministic template instantiation for the prompt's target slot."""
    catalog = catalog or DEFAULT_TEMPLATES
    target = prompt.target_slot
    fallback = target != "Action" and not prompt.frame.has_slot("Action")
    slot = "Action" if fallback else target
    entry = catalog[slot]
    return GeneratedQuestion(
        text=_instantiate(entry["pattern"], prompt.frame),
        template_id=entry["id"],
        slot=slot,
        requested_slot=target,
        fallback=fallback,
    )


def suggest_questions(
    frame: SemanticFrame,
    required: Iterable[str],
    limit: int,
    catalog: Mapping[str, Mapping[str, str]] | None = None,
) -> list[GeneratedQuestion]:
    """One question per missing required slot, by slot priority, truncated to ``limit``.

    The output always has min(limit, number of missing required slots)
    entries; when the Action itself is unknown, lower-priority entries fall
    back to the generic action question and are flagged as such.
    """
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")
    missing = frame_missing_slots(frame, required)
    return [
        generate_question(QuestionPrompt(frame=frame, target_slot=slot), catalog)
        for slot in missing[:limit]
    ]
