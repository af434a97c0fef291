#!/usr/bin/env python3
"""Record real channel traffic into the JSON fixtures used by the UI tests.

Drives the engine's HTTP/websocket service in-process: a wizard socket and a
performer socket exchange narration, embeddings and wizard actions, including
the three question-sending shapes the console produces (unedited suggestion,
edited suggestion, fully manual). The resulting session log and the per-role
filtered streams are dumped under tests/fixtures/ exactly as the sockets
would deliver them, so the UI tests run against genuine wire payloads.

Run from anywhere: python3 scripts/generate_fixtures.py
(requires the engine package installed, e.g. pip install -e ..)
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from taskguide.embeddings import fallback_embed_text
from taskguide.server import create_app
from taskguide.session import SessionEngine, SessionEvent, event_visible_to

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

SPEC_DOCUMENT = {
    "spec_id": "cook-rice",
    "title": "Cook rice",
    "items": [
        {
            "index": 0,
            "text": "Wash the rice in cold water",
            "frame": {
                "Action": ["wash"],
                "Receiver": ["the rice"],
                "Location": ["in cold water"],
            },
            "actions": [
                {
                    "index": 0,
                    "text": "rinse rice until water runs clear",
                    "frame": {"Action": ["rinse"], "Receiver": ["rice"]},
                    "optional": False,
                }
            ],
        },
        {
            "index": 1,
            "text": "Boil the rice in the pot",
            "frame": {"Action": ["boil"], "Receiver": ["the rice"]},
            "actions": [],
        },
        {
            "index": 2,
            "text": "Serve the rice on a plate",
            "frame": {"Action": ["serve"], "Receiver": ["the rice"]},
            "actions": [],
        },
    ],
}


def recv_until_ack(ws) -> dict:
    """Read frames until the ack for the message just sent arrives."""
    while True:
        frame = ws.receive_json()
        if frame["type"] == "ack":
            return frame
        if frame["type"] == "error":
            raise RuntimeError(f"channel error: {frame['error']}")


def main() -> None:
    engine = SessionEngine()
    client = TestClient(create_app(engine))

    assert client.post("/specs", json=SPEC_DOCUMENT).status_code == 200
    created = client.post(
        "/sessions",
        json={
            "mode": "guidance",
            "spec_id": "cook-rice",
            "config": {
                "encoder_dim": 16,
                "cadence_ms": 500,
                "auto_prompts": ["Please describe what you are doing."],
            },
        },
    ).json()
    session_id = created["session_id"]

    wizard = client.websocket_connect("/ws")
    wizard.__enter__()
    wizard.send_json({"session_id": session_id, "role": "wizard"})
    assert wizard.receive_json()["type"] == "welcome"

    performer = client.websocket_connect("/ws")
    performer.__enter__()
    performer.send_json({"session_id": session_id, "role": "performer"})
    assert performer.receive_json()["type"] == "welcome"

    # the narration leaves the Tool slot empty, so the engine suggests a
    # Tool question the wizard can pick up
    performer.send_json(
        {
            "type": "narration",
            "chunk_index": 0,
            "text": "I chop the onion",
            "start_ms": 0,
            "end_ms": 1500,
        }
    )
    recv_until_ack(performer)

    log = client.get(f"/sessions/{session_id}/log").json()
    suggested = next(
        e for e in log["events"] if e["kind"] == "question-suggested"
    )
    suggestion = suggested["payload"]["questions"][0]

    # the three question shapes the console can produce, verbatim
    unedited = {
        "type": "act",
        "kind": "ask-question",
        "text": suggestion["text"],
        "slot": suggestion["requested_slot"],
        "provenance": suggestion["template_id"],
    }
    edited = {
        "type": "act",
        "kind": "edit-question",
        "text": "What exactly are you cutting the onion with?",
        "slot": suggestion["requested_slot"],
        "provenance": suggestion["template_id"],
    }
    manual = {
        "type": "act",
        "kind": "ask-question",
        "text": "Is the stove already on?",
        "slot": None,
        "provenance": "manual",
    }
    for message in (unedited, edited, manual):
        wizard.send_json(message)
        recv_until_ack(wizard)

    # streamed frame embeddings drive live item estimates (guidance mode)
    for t_ms, item in ((2000, 0), (2600, 0), (3200, 1)):
        performer.send_json(
            {
                "type": "frame-embedding",
                "t_ms": t_ms,
                "vector": fallback_embed_text(
                    SPEC_DOCUMENT["items"][item]["text"], 16
                ).tolist(),
            }
        )
        recv_until_ack(performer)

    for message in (
        {"type": "act", "kind": "select-utterance", "utterance_id": "prompt-continue"},
        {"type": "act", "kind": "video-control", "cmd": "loop"},
        {"type": "act", "kind": "confirm-item", "item": 0},
        {"type": "act", "kind": "note", "text": "left hand holds the board"},
    ):
        wizard.send_json(message)
        recv_until_ack(wizard)

    # a second chunk fills the missing Tool slot
    performer.send_json(
        {
            "type": "narration",
            "chunk_index": 1,
            "text": "now I chop it with the big knife",
            "start_ms": 2700,
            "end_ms": 3600,
        }
    )
    recv_until_ack(performer)

    performer.__exit__(None, None, None)
    wizard.__exit__(None, None, None)

    # both disconnect notes must be in the log before it is captured
    for _ in range(200):
        log = client.get(f"/sessions/{session_id}/log").json()
        gone = [
            e
            for e in log["events"]
            if e["payload"].get("note_type") == "participant-disconnected"
        ]
        if len(gone) == 2:
            break
    else:
        raise RuntimeError("disconnect notes never appeared")

    events = log["events"]
    performer_events = [
        e
        for e in events
        if event_visible_to(
            SessionEvent.from_dict(e), "performer", log["header"]["mode"]
        )
    ]

    FIXTURES.mkdir(parents=True, exist_ok=True)
    out = {
        "session.json": {
            "session_id": session_id,
            "mode": log["header"]["mode"],
            "spec": client.get("/specs/cook-rice").json(),
            "utterance_catalog": log["header"]["config"]["utterance_catalog"],
        },
        "wizard-events.json": events,
        "performer-events.json": performer_events,
        "sent-questions.json": {
            "suggestion": suggestion,
            "unedited": unedited,
            "edited": edited,
            "manual": manual,
        },
    }
    for name, data in out.items():
        path = FIXTURES / name
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
