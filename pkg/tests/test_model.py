import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from taskguide.model import (
    SLOT_NAMES,
    AtomicAction,
    EmbeddingStream,
    SemanticFrame,
    Spec,
    SpecFormatError,
    SpecItem,
    TranscriptChunk,
    frame_missing_slots,
    load_spec,
    serialize_spec,
    spec_to_document,
    validate_chunk_sequence,
)
from conftest import rice_spec_document


def test_slot_names_are_the_ten_frame_slots():
    assert SLOT_NAMES == (
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


def test_frame_rejects_unknown_slot():
    with pytest.raises(SpecFormatError, match="unknown slot name"):
        SemanticFrame({"Widget": ["x"]})


def test_frame_normalizes_empty_span_lists():
    frame = SemanticFrame({"Action": ["chop"], "Tool": []})
    assert frame.filled_slots() == frozenset({"Action"})
    assert not frame.has_slot("Tool")


def test_frame_add_span_deduplicates():
    frame = SemanticFrame()
    assert frame.add_span("Tool", "with a knife")
    assert not frame.add_span("Tool", "with a knife")
    assert frame.add_span("Tool", "with the peeler")
    assert frame.slots["Tool"] == ["with a knife", "with the peeler"]


def test_frame_add_span_ignores_empty_text():
    frame = SemanticFrame()
    assert not frame.add_span("Action", "")
    assert frame.filled_slots() == frozenset()


def test_frame_to_dict_uses_priority_order():
    frame = SemanticFrame({"Note": ["careful"], "Action": ["cut"], "Tool": ["knife"]})
    assert list(frame.to_dict()) == ["Action", "Tool", "Note"]


def test_missing_slots_in_priority_order():
    frame = SemanticFrame({"Receiver": ["the rice"]})
    missing = frame_missing_slots(frame, {"Receiver", "Tool", "Action"})
    assert missing == ("Action", "Tool")


def test_missing_slots_rejects_unknown_required_slot():
    with pytest.raises(SpecFormatError, match="unknown slot name"):
        frame_missing_slots(SemanticFrame(), {"Action", "Gadget"})


def test_load_spec_round_trip(spec_document):
    spec = load_spec(spec_document)
    assert spec.spec_id == "cook-rice"
    assert len(spec) == 3
    assert spec.item(0).actions[0].text == "rinse rice until water runs clear"
    again = load_spec(serialize_spec(spec))
    assert again == spec
    assert serialize_spec(again) == serialize_spec(spec)


def test_load_spec_accepts_bytes(spec_document):
    raw = json.dumps(spec_document).encode("utf-8")
    assert load_spec(raw).spec_id == "cook-rice"


def test_load_spec_rejects_bad_json():
    with pytest.raises(SpecFormatError, match="malformed document"):
        load_spec("{not json")


def test_load_spec_rejects_missing_fields(spec_document):
    del spec_document["title"]
    with pytest.raises(SpecFormatError, match="missing field 'title'"):
        load_spec(spec_document)


def test_spec_rejects_duplicate_item_index(spec_document):
    spec_document["items"][1]["index"] = 0
    with pytest.raises(SpecFormatError, match="duplicate item index: 0"):
        load_spec(spec_document)


def test_spec_rejects_gap_in_item_indices(spec_document):
    spec_document["items"][2]["index"] = 5
    with pytest.raises(SpecFormatError, match="non-contiguous or unordered indices"):
        load_spec(spec_document)


def test_spec_rejects_empty_items():
    with pytest.raises(SpecFormatError, match="empty items list"):
        load_spec({"spec_id": "x", "title": "t", "items": []})


def test_item_frame_must_fill_action():
    with pytest.raises(SpecFormatError, match="must fill the Action slot"):
        SpecItem(index=0, text="step", frame=SemanticFrame({"Tool": ["pan"]}))


def test_action_indices_must_be_contiguous():
    actions = [
        AtomicAction(index=0, text="a", frame=SemanticFrame({"Action": ["do"]})),
        AtomicAction(index=2, text="b", frame=SemanticFrame({"Action": ["do"]})),
    ]
    with pytest.raises(SpecFormatError, match="non-contiguous or unordered action indices"):
        SpecItem(
            index=0,
            text="step",
            frame=SemanticFrame({"Action": ["do"]}),
            actions=actions,
        )


def test_spec_document_optional_fields_survive(spec_document):
    spec_document["items"][0]["image_ref"] = "img/wash.png"
    spec_document["items"][0]["actions"][0]["group"] = "prep"
    spec = load_spec(spec_document)
    doc = spec_to_document(spec)
    assert doc["items"][0]["image_ref"] == "img/wash.png"
    assert doc["items"][0]["actions"][0]["group"] == "prep"
    assert "image_ref" not in doc["items"][1]
    assert load_spec(doc) == spec


_slot_name = st.sampled_from(SLOT_NAMES)
_span = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), whitelist_characters=" '"),
    min_size=1,
    max_size=12,
).filter(str.strip)


@st.composite
def _frames(draw, force_action=True):
    slots = {}
    if force_action:
        slots["Action"] = draw(st.lists(_span, min_size=1, max_size=2, unique=True))
    for slot in draw(st.lists(_slot_name, max_size=4, unique=True)):
        slots.setdefault(slot, draw(st.lists(_span, min_size=1, max_size=2, unique=True)))
    return SemanticFrame(slots)


@st.composite
def _specs(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    items = []
    for i in range(n):
        k = draw(st.integers(min_value=0, max_value=2))
        actions = [
            AtomicAction(index=j, text=draw(_span), frame=draw(_frames()))
            for j in range(k)
        ]
        items.append(
            SpecItem(index=i, text=draw(_span), frame=draw(_frames()), actions=actions)
        )
    return Spec(spec_id=draw(_span), title=draw(_span), items=items)


@given(_specs())
def test_serialize_then_load_is_identity(spec):
    assert load_spec(serialize_spec(spec)) == spec


def test_chunk_rejects_inverted_extent():
    with pytest.raises(ValueError, match="start_ms 30 exceeds end_ms 10"):
        TranscriptChunk(chunk_index=0, text="x", start_ms=30, end_ms=10)


def test_chunk_sequence_validation():
    good = [
        TranscriptChunk(0, "a", 0, 900),
        TranscriptChunk(1, "b", 900, 1800),
    ]
    validate_chunk_sequence(good)
    bad = [good[1], good[0]]
    with pytest.raises(ValueError, match="chunk_index must strictly increase"):
        validate_chunk_sequence(bad)


def test_embedding_stream_invariants():
    stream = EmbeddingStream(
        timestamps_ms=[0, 1000, 2000], vectors=np.eye(3, 4), cadence_ms=1000
    )
    assert stream.dim == 4
    assert len(stream) == 3
    assert [t for t, _ in stream.entries()] == [0, 1000, 2000]

    with pytest.raises(ValueError, match="non-monotone timestamps"):
        EmbeddingStream(timestamps_ms=[0, 0], vectors=np.zeros((2, 2)))
    with pytest.raises(ValueError, match="non-finite vector"):
        EmbeddingStream(timestamps_ms=[0], vectors=[[np.nan, 1.0]])


def test_rice_fixture_is_valid():
    assert load_spec(rice_spec_document()).title == "Cook rice"
