"""Command line front door: offline evaluation and the live service."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from taskguide.evaluation import (
    AnnotatedStream,
    GoldSegment,
    ReportRow,
    evaluate_retrieval,
    report_table,
)
from taskguide.embeddings import ingest_embedding_file
from taskguide.model import load_spec


def _parse_windows(raw: str) -> list[int]:
    try:
        windows = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise SystemExit(f"bad --windows value: {raw!r}")
    if not windows or any(w <= 0 for w in windows):
        raise SystemExit(f"bad --windows value: {raw!r}")
    return windows


def _cmd_evaluate(args: argparse.Namespace) -> int:
    spec = load_spec(Path(args.spec).read_bytes())
    stream = ingest_embedding_file(args.stream)
    gold_raw = json.loads(Path(args.gold).read_text())
    gold = [
        GoldSegment(start_ms=g["start_ms"], end_ms=g["end_ms"], item=g["item"])
        for g in gold_raw
    ]
    annotated = AnnotatedStream(gold=gold, stream=stream)

    rows = []
    for seconds in _parse_windows(args.windows):
        window_ms = seconds * 1000
        scores = evaluate_retrieval(
            spec, annotated, window_ms=window_ms, cadence_ms=args.cadence
        )
        rows.append(ReportRow(label=f"window-{seconds}s", scores=scores, window_ms=window_ms))

    text, data = report_table(rows)
    print(text)
    if args.out:
        Path(args.out).write_text(json.dumps(data, indent=2) + "\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from taskguide.server import create_app
    from taskguide.session import SessionEngine, SessionStore

    store = SessionStore(args.store) if args.store else None
    engine = SessionEngine(store=store)
    for spec_path in args.spec or []:
        spec = engine.load_spec_document(Path(spec_path).read_bytes())
        print(f"loaded spec {spec.spec_id!r} ({len(spec.items)} items)")
    uvicorn.run(create_app(engine), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskguide",
        description="Task guidance engine: offline retrieval evaluation and the live session service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="windowed spec-item retrieval scored against gold segments")
    ev.add_argument("--spec", required=True, help="spec document (JSON)")
    ev.add_argument("--stream", required=True, help="binary embedding stream file")
    ev.add_argument("--gold", required=True, help="JSON list of {start_ms, end_ms, item}")
    ev.add_argument("--windows", default="1,2,4,6,8", help="comma-separated window lengths in seconds")
    ev.add_argument("--cadence", type=int, default=1000, help="evaluation tick spacing in ms")
    ev.add_argument("--out", default=None, help="write the full-precision JSON report here")
    ev.set_defaults(func=_cmd_evaluate)

    sv = sub.add_parser("serve", help="run the wizard-of-oz session service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.add_argument("--spec", action="append", help="spec document to preload (repeatable)")
    sv.add_argument("--store", default=None, help="directory for session logs (JSONL + header)")
    sv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
