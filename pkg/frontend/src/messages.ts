/**
 * Builders for outgoing channel messages.
 *
 * Every send control in the consoles routes through exactly one builder, so
 * one user gesture always becomes one channel message. Question provenance
 * follows the engine contract: unedited suggestions keep their template id
 * on the ask, edits switch to the edit action but retain the id, and fully
 * manual questions are marked "manual".
 */

import type {
  FrameEmbeddingMessage,
  NarrationMessage,
  SuggestedQuestion,
  VideoCommand,
  WizardActMessage,
} from "./protocol.js";

export const MANUAL_PROVENANCE = "manual";

function requireText(text: string): string {
  const trimmed = text.trim();
  if (!trimmed) {
    throw new Error("text must not be empty");
  }
  return trimmed;
}

export function selectUtterance(utteranceId: string): WizardActMessage {
  if (!utteranceId) {
    throw new Error("utterance id must not be empty");
  }
  return { type: "act", kind: "select-utterance", utterance_id: utteranceId };
}

export function freeText(text: string): WizardActMessage {
  return { type: "act", kind: "free-text", text: requireText(text) };
}

export function manualQuestion(
  text: string,
  slot: string | null = null,
): WizardActMessage {
  return {
    type: "act",
    kind: "ask-question",
    text: requireText(text),
    slot,
    provenance: MANUAL_PROVENANCE,
  };
}

/** Send a suggested question, as-is or after editing in the compose box. */
export function questionFromSuggestion(
  suggestion: SuggestedQuestion,
  finalText: string,
): WizardActMessage {
  const text = requireText(finalText);
  const slot = suggestion.requested_slot;
  if (text === suggestion.text) {
    return {
      type: "act",
      kind: "ask-question",
      text,
      slot,
      provenance: suggestion.template_id,
    };
  }
  return {
    type: "act",
    kind: "edit-question",
    text,
    slot,
    provenance: suggestion.template_id,
  };
}

export function videoControl(cmd: VideoCommand): WizardActMessage {
  return { type: "act", kind: "video-control", cmd };
}

export function confirmItem(item: number): WizardActMessage {
  if (!Number.isInteger(item) || item < 0) {
    throw new Error(`item index must be a non-negative integer, got ${item}`);
  }
  return { type: "act", kind: "confirm-item", item };
}

export function wizardNote(text: string): WizardActMessage {
  return { type: "act", kind: "note", text: requireText(text) };
}

export function narration(
  chunkIndex: number,
  text: string,
  startMs: number,
  endMs: number,
): NarrationMessage {
  return {
    type: "narration",
    chunk_index: chunkIndex,
    text,
    start_ms: startMs,
    end_ms: endMs,
  };
}

export function frameEmbedding(
  tMs: number,
  vector: number[],
): FrameEmbeddingMessage {
  return { type: "frame-embedding", t_ms: tMs, vector };
}
