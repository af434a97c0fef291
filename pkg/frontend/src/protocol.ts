/**
 * Wire schema for the session service.
 *
 * Everything here mirrors the server side verbatim (snake_case field names
 * included); the UI invents no shapes of its own. REST carries spec and
 * session lifecycle, the websocket channel carries the live event stream.
 */

export type Role = "wizard" | "performer";

export type SessionMode = "post-hoc" | "during" | "guidance";

export type Actor = "wizard" | "performer" | "system";

export type EventKind =
  | "narration-chunk"
  | "wizard-utterance"
  | "question-suggested"
  | "question-asked"
  | "video-control"
  | "spec-estimate"
  | "action-estimate"
  | "frame-update"
  | "tts-request"
  | "note";

export interface SessionEvent {
  seq: number;
  t_ms: number;
  kind: EventKind;
  actor: Actor;
  payload: Record<string, unknown>;
}

export const VIDEO_COMMANDS = [
  "play",
  "pause",
  "rewind",
  "forward",
  "loop",
  "zoom",
] as const;

export type VideoCommand = (typeof VIDEO_COMMANDS)[number];

// -- spec documents (REST) --------------------------------------------------

export type SpecFrame = Record<string, string[]>;

export interface SpecAction {
  index: number;
  text: string;
  frame: SpecFrame;
  optional: boolean;
  group?: string | null;
}

export interface SpecItem {
  index: number;
  text: string;
  frame: SpecFrame;
  actions: SpecAction[];
  image_ref?: string | null;
}

export interface SpecDocument {
  spec_id: string;
  title: string;
  items: SpecItem[];
}

export interface SessionSummary {
  session_id: string;
  mode: SessionMode;
  spec_id: string;
  active: boolean;
  events: number;
}

// -- derived-event payloads the UI renders ----------------------------------

export interface SpecEstimatePayload {
  item: number;
  score: number;
  scores: number[];
}

export interface ActionEstimatePayload {
  label: number;
  probs: number[];
}

export interface FrameUpdatePayload {
  slots: Record<string, string[]>;
  missing: string[];
}

export interface SuggestedQuestion {
  text: string;
  template_id: string;
  slot: string;
  requested_slot: string;
  fallback: boolean;
}

export interface QuestionSuggestedPayload {
  questions: SuggestedQuestion[];
  missing: string[];
}

export interface TtsRequestPayload {
  text: string;
  source: "wizard" | "auto-prompt";
  source_seq: number | null;
}

// -- channel frames, server -> client ---------------------------------------

export interface WelcomeFrame {
  type: "welcome";
  session_id: string;
  role: Role;
  mode: SessionMode;
}

export interface EventFrame {
  type: "event";
  event: SessionEvent;
}

export interface AckFrame {
  type: "ack";
  seqs: number[];
}

export interface ErrorFrame {
  type: "error";
  error: string;
}

export type ServerFrame = WelcomeFrame | EventFrame | AckFrame | ErrorFrame;

// -- channel messages, client -> server -------------------------------------

export interface HelloMessage {
  session_id: string;
  role: Role;
  last_seq?: number;
}

export type WizardActMessage =
  | { type: "act"; kind: "select-utterance"; utterance_id: string }
  | { type: "act"; kind: "free-text"; text: string }
  | {
      type: "act";
      kind: "ask-question";
      text: string;
      slot: string | null;
      provenance: string;
    }
  | {
      type: "act";
      kind: "edit-question";
      text: string;
      slot: string | null;
      provenance: string;
    }
  | { type: "act"; kind: "video-control"; cmd: VideoCommand }
  | { type: "act"; kind: "confirm-item"; item: number }
  | { type: "act"; kind: "note"; text: string };

export interface NarrationMessage {
  type: "narration";
  chunk_index: number;
  text: string;
  start_ms: number;
  end_ms: number;
}

export interface FrameEmbeddingMessage {
  type: "frame-embedding";
  t_ms: number;
  vector: number[];
}

export type ClientMessage =
  | WizardActMessage
  | NarrationMessage
  | FrameEmbeddingMessage;

export function parseServerFrame(data: string): ServerFrame {
  const frame = JSON.parse(data) as { type?: unknown };
  if (
    frame.type !== "welcome" &&
    frame.type !== "event" &&
    frame.type !== "ack" &&
    frame.type !== "error"
  ) {
    throw new Error(`unknown server frame type: ${String(frame.type)}`);
  }
  return frame as ServerFrame;
}
