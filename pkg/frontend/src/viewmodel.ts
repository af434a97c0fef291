/**
 * Pure view state over the session event stream.
 *
 * Invariants:
 * - State is a function of (static session context, ordered events). Feeding
 *   the same log twice yields identical models; nothing here asks the clock,
 *   the network, or a random source.
 * - No model inference happens client-side. Estimates, frame fills and
 *   question suggestions all arrive as engine events and are displayed as-is.
 * - Events apply in seq order; re-delivered or stale events are ignored, so
 *   a reconnect overlap cannot double-append log entries.
 */

import type {
  ActionEstimatePayload,
  FrameUpdatePayload,
  QuestionSuggestedPayload,
  Role,
  SessionEvent,
  SessionMode,
  SpecEstimatePayload,
  SuggestedQuestion,
  TtsRequestPayload,
  VideoCommand,
} from "./protocol.js";

export interface TranscriptLine {
  chunkIndex: number;
  text: string;
  startMs: number;
  endMs: number;
}

export interface ConversationEntry {
  seq: number;
  tMs: number;
  speaker: "wizard" | "performer" | "system";
  kind: "narration" | "utterance" | "question" | "tts" | "note";
  text: string;
  /** question entries keep their originating template id (or "manual") */
  provenance?: string;
  edited?: boolean;
  slot?: string | null;
}

export interface ParticipantFlags {
  wizard: boolean;
  performer: boolean;
}

/** Shared core of both consoles' state. */
export interface SessionViewModel {
  mode: SessionMode;
  itemCount: number;
  lastSeq: number;
  /** exactly one item highlighted at a time; null before the first estimate */
  highlightedItem: number | null;
  estimateScores: number[];
  /** sticky error badge for malformed estimates; cleared by the next good one */
  estimateBadge: string | null;
  currentActionLabel: number | null;
  actionProbs: number[];
  transcript: TranscriptLine[];
  conversation: ConversationEntry[];
  /** last control plus its seq, so a player can react to repeats */
  videoCommand: { cmd: VideoCommand; seq: number } | null;
  participants: ParticipantFlags;
  confirmedItems: number[];
  spokenLines: string[];
}

export interface WizardViewModel extends SessionViewModel {
  frameSlots: Record<string, string[]>;
  missingSlots: string[];
  suggestions: SuggestedQuestion[];
}

export type PerformerViewModel = SessionViewModel;

function emptyCore(mode: SessionMode, itemCount: number): SessionViewModel {
  return {
    mode,
    itemCount,
    lastSeq: -1,
    highlightedItem: null,
    estimateScores: [],
    estimateBadge: null,
    currentActionLabel: null,
    actionProbs: [],
    transcript: [],
    conversation: [],
    videoCommand: null,
    participants: { wizard: false, performer: false },
    confirmedItems: [],
    spokenLines: [],
  };
}

export function emptyWizardView(
  mode: SessionMode,
  itemCount: number,
): WizardViewModel {
  return {
    ...emptyCore(mode, itemCount),
    frameSlots: {},
    missingSlots: [],
    suggestions: [],
  };
}

export function emptyPerformerView(
  mode: SessionMode,
  itemCount: number,
): PerformerViewModel {
  return emptyCore(mode, itemCount);
}

function pushConversation(
  view: SessionViewModel,
  event: SessionEvent,
  entry: Omit<ConversationEntry, "seq" | "tMs">,
): void {
  view.conversation.push({ seq: event.seq, tMs: event.t_ms, ...entry });
}

function applyCore(view: SessionViewModel, event: SessionEvent): boolean {
  // ordered application: drop anything we have already seen
  if (event.seq <= view.lastSeq) {
    return false;
  }
  view.lastSeq = event.seq;

  switch (event.kind) {
    case "narration-chunk": {
      const p = event.payload as {
        chunk_index: number;
        text: string;
        start_ms: number;
        end_ms: number;
      };
      view.transcript.push({
        chunkIndex: p.chunk_index,
        text: p.text,
        startMs: p.start_ms,
        endMs: p.end_ms,
      });
      if (p.text.trim()) {
        pushConversation(view, event, {
          speaker: "performer",
          kind: "narration",
          text: p.text,
        });
      }
      break;
    }
    case "spec-estimate": {
      const p = event.payload as unknown as SpecEstimatePayload;
      if (Number.isInteger(p.item) && p.item >= 0 && p.item < view.itemCount) {
        view.highlightedItem = p.item; // previous highlight replaced, never added
        view.estimateScores = [...p.scores];
        view.estimateBadge = null;
      } else {
        view.estimateBadge = `estimate out of range: ${String(p.item)}`;
      }
      break;
    }
    case "action-estimate": {
      const p = event.payload as unknown as ActionEstimatePayload;
      view.currentActionLabel = p.label;
      view.actionProbs = [...p.probs];
      break;
    }
    case "wizard-utterance": {
      const p = event.payload as { utterance_id: string | null; text: string };
      pushConversation(view, event, {
        speaker: "wizard",
        kind: "utterance",
        text: p.text,
      });
      break;
    }
    case "question-asked": {
      const p = event.payload as {
        text: string;
        slot: string | null;
        provenance: string;
        edited: boolean;
      };
      pushConversation(view, event, {
        speaker: "wizard",
        kind: "question",
        text: p.text,
        provenance: p.provenance,
        edited: p.edited,
        slot: p.slot,
      });
      break;
    }
    case "tts-request": {
      const p = event.payload as unknown as TtsRequestPayload;
      view.spokenLines.push(p.text);
      pushConversation(view, event, {
        speaker: "system",
        kind: "tts",
        text: p.text,
      });
      break;
    }
    case "video-control": {
      const p = event.payload as { cmd: VideoCommand };
      view.videoCommand = { cmd: p.cmd, seq: event.seq };
      break;
    }
    case "note": {
      const p = event.payload as Record<string, unknown>;
      const noteType = p["note_type"];
      if (noteType === "participant-connected" || noteType === "participant-disconnected") {
        const role = p["role"] as Role;
        view.participants[role] = noteType === "participant-connected";
      } else if (noteType === "confirm-item") {
        view.confirmedItems.push(p["item"] as number);
      } else if (noteType === "correction") {
        pushConversation(view, event, {
          speaker: "wizard",
          kind: "note",
          text: String(p["text"] ?? ""),
        });
      }
      break;
    }
    default:
      // frame-update / question-suggested are wizard-only concerns
      break;
  }
  return true;
}

export function applyToWizardView(
  view: WizardViewModel,
  event: SessionEvent,
): WizardViewModel {
  if (!applyCore(view, event)) {
    return view;
  }
  if (event.kind === "frame-update") {
    const p = event.payload as unknown as FrameUpdatePayload;
    view.frameSlots = { ...p.slots };
    view.missingSlots = [...p.missing];
  } else if (event.kind === "question-suggested") {
    const p = event.payload as unknown as QuestionSuggestedPayload;
    view.suggestions = p.questions.map((q) => ({ ...q }));
  }
  return view;
}

export function applyToPerformerView(
  view: PerformerViewModel,
  event: SessionEvent,
): PerformerViewModel {
  applyCore(view, event);
  return view;
}

export function reduceWizardView(
  mode: SessionMode,
  itemCount: number,
  events: readonly SessionEvent[],
): WizardViewModel {
  const view = emptyWizardView(mode, itemCount);
  for (const event of events) {
    applyToWizardView(view, event);
  }
  return view;
}

export function reducePerformerView(
  mode: SessionMode,
  itemCount: number,
  events: readonly SessionEvent[],
): PerformerViewModel {
  const view = emptyPerformerView(mode, itemCount);
  for (const event of events) {
    applyToPerformerView(view, event);
  }
  return view;
}
