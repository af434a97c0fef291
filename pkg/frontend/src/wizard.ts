/**
 * The operator console.
 *
 * Holds a WizardViewModel fed exclusively by channel events, plus one send
 * helper per control in the panel. Each helper builds exactly one channel
 * message; nothing mutates the view directly, the echo always comes back as
 * an event. The view therefore replays byte-for-byte from a recorded log.
 */

import type {
  ClientMessage,
  SpecDocument,
  SessionEvent,
  SessionMode,
  VideoCommand,
  SuggestedQuestion,
} from "./protocol.js";
import * as messages from "./messages.js";
import {
  applyToWizardView,
  emptyWizardView,
  type WizardViewModel,
} from "./viewmodel.js";

/** What the console needs from the transport; SessionChannel satisfies it. */
export interface MessageSink {
  send(message: ClientMessage): void;
}

export class WizardConsole {
  readonly spec: SpecDocument;
  readonly utteranceCatalog: Record<string, string>;
  readonly view: WizardViewModel;
  private readonly sink: MessageSink;

  constructor(
    spec: SpecDocument,
    mode: SessionMode,
    sink: MessageSink,
    utteranceCatalog: Record<string, string> = {},
  ) {
    this.spec = spec;
    this.utteranceCatalog = utteranceCatalog;
    this.view = emptyWizardView(mode, spec.items.length);
    this.sink = sink;
  }

  handleEvent(event: SessionEvent): void {
    applyToWizardView(this.view, event);
  }

  /** Pre-filled utterance button. */
  selectUtterance(utteranceId: string): void {
    this.sink.send(messages.selectUtterance(utteranceId));
  }

  sendFreeText(text: string): void {
    this.sink.send(messages.freeText(text));
  }

  /**
   * Send a question from the compose box. With a suggestion attached the
   * provenance rules apply (template id kept, edit detected by text diff);
   * without one it goes out as a manual question.
   */
  sendQuestion(
    suggestion: SuggestedQuestion | null,
    finalText: string,
    slot: string | null = null,
  ): void {
    if (suggestion) {
      this.sink.send(messages.questionFromSuggestion(suggestion, finalText));
    } else {
      this.sink.send(messages.manualQuestion(finalText, slot));
    }
  }

  sendVideoControl(cmd: VideoCommand): void {
    this.sink.send(messages.videoControl(cmd));
  }

  confirmItem(item: number): void {
    if (item < 0 || item >= this.spec.items.length) {
      throw new Error(`item index out of range: ${item}`);
    }
    this.sink.send(messages.confirmItem(item));
  }

  addNote(text: string): void {
    this.sink.send(messages.wizardNote(text));
  }
}
