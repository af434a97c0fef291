/**
 * Fixture access for the test suite.
 *
 * The files under fixtures/ are recorded engine traffic (see
 * scripts/generate_fixtures.py): the full wizard-visible event log, the
 * performer-filtered log, the session metadata, and the exact question
 * messages the wizard socket sent. Tests treat them as ground truth.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type {
  Actor,
  EventKind,
  SessionEvent,
  SessionMode,
  SpecDocument,
  SuggestedQuestion,
  WizardActMessage,
} from "../src/protocol.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf8")) as T;
}

export interface SessionMeta {
  session_id: string;
  mode: SessionMode;
  spec: SpecDocument;
  utterance_catalog: Record<string, string>;
}

export interface SentQuestions {
  suggestion: SuggestedQuestion;
  unedited: WizardActMessage;
  edited: WizardActMessage;
  manual: WizardActMessage;
}

export const meta = loadFixture<SessionMeta>("session.json");
export const wizardEvents = loadFixture<SessionEvent[]>("wizard-events.json");
export const performerEvents = loadFixture<SessionEvent[]>(
  "performer-events.json",
);
export const sentQuestions = loadFixture<SentQuestions>("sent-questions.json");

/** Synthetic event for behavior tests that need shapes the log lacks. */
export function ev(
  seq: number,
  kind: EventKind,
  payload: Record<string, unknown>,
  actor: Actor = "system",
): SessionEvent {
  return { seq, t_ms: seq * 100, kind, actor, payload };
}

export function ttsTexts(events: readonly SessionEvent[]): string[] {
  return events
    .filter((e) => e.kind === "tts-request")
    .map((e) => String(e.payload["text"]));
}
