/**
 * The performer view: read-mostly.
 *
 * Renders the spec with the current item highlight, mirrors the conversation
 * log, speaks tts-request events aloud and forwards video-control events to
 * the local player. Upstream it only sends narration text and frame
 * embeddings; all guidance comes back as events.
 */

import type { SessionEvent, SessionMode, SpecDocument, VideoCommand } from "./protocol.js";
import * as messages from "./messages.js";
import {
  applyToPerformerView,
  emptyPerformerView,
  type PerformerViewModel,
} from "./viewmodel.js";
import type { MessageSink } from "./wizard.js";

export interface SpeechSink {
  speak(text: string): void;
}

export interface PlayerSink {
  apply(cmd: VideoCommand): void;
}

/** Platform speech synthesis, when running in a real browser. */
export function browserSpeech(): SpeechSink {
  return {
    speak(text: string): void {
      if (typeof speechSynthesis !== "undefined") {
        speechSynthesis.speak(new SpeechSynthesisUtterance(text));
      }
    },
  };
}

export class PerformerConsole {
  readonly spec: SpecDocument;
  readonly view: PerformerViewModel;
  private readonly sink: MessageSink;
  private readonly speech: SpeechSink | null;
  private readonly player: PlayerSink | null;

  constructor(
    spec: SpecDocument,
    mode: SessionMode,
    sink: MessageSink,
    speech: SpeechSink | null = null,
    player: PlayerSink | null = null,
  ) {
    this.spec = spec;
    this.view = emptyPerformerView(mode, spec.items.length);
    this.sink = sink;
    this.speech = speech;
    this.player = player;
  }

  handleEvent(event: SessionEvent): void {
    const before = this.view.lastSeq;
    applyToPerformerView(this.view, event);
    if (this.view.lastSeq === before) {
      return; // stale or duplicate: no side effects either
    }
    if (event.kind === "tts-request") {
      this.speech?.speak(String(event.payload["text"]));
    } else if (event.kind === "video-control") {
      this.player?.apply(event.payload["cmd"] as VideoCommand);
    }
  }

  /** Current atomic action text for the action pane, if the engine sent one. */
  currentActionText(): string | null {
    const item =
      this.view.highlightedItem === null
        ? null
        : this.spec.items[this.view.highlightedItem];
    if (!item || this.view.currentActionLabel === null) {
      return null;
    }
    const action = item.actions[this.view.currentActionLabel];
    return action ? action.text : null;
  }

  currentStepImage(): string | null {
    const item =
      this.view.highlightedItem === null
        ? null
        : this.spec.items[this.view.highlightedItem];
    return item?.image_ref ?? null;
  }

  narrate(chunkIndex: number, text: string, startMs: number, endMs: number): void {
    this.sink.send(messages.narration(chunkIndex, text, startMs, endMs));
  }

  sendFrameEmbedding(tMs: number, vector: number[]): void {
    this.sink.send(messages.frameEmbedding(tMs, vector));
  }
}
