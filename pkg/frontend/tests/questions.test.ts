import { describe, expect, it } from "vitest";

import {
  MANUAL_PROVENANCE,
  manualQuestion,
  questionFromSuggestion,
} from "../src/messages.js";
import { sentQuestions, wizardEvents } from "./helpers.js";

const { suggestion } = sentQuestions;

interface AskedPayload {
  text: string;
  slot: string | null;
  provenance: string;
  edited: boolean;
}

const asked = wizardEvents
  .filter((e) => e.kind === "question-asked")
  .map((e) => e.payload as unknown as AskedPayload);

describe("question round trip through the engine", () => {
  it("recorded session asked exactly the three shapes", () => {
    expect(asked).toHaveLength(3);
  });

  it("an unedited suggestion keeps its template id end to end", () => {
    // the builder reproduces byte-for-byte what the socket sent
    const message = questionFromSuggestion(suggestion, suggestion.text);
    expect(message).toEqual(sentQuestions.unedited);
    expect(message.kind).toBe("ask-question");

    // and the engine's logged event retained the provenance
    expect(asked[0]).toEqual({
      text: suggestion.text,
      slot: suggestion.requested_slot,
      provenance: suggestion.template_id,
      edited: false,
    });
  });

  it("an edited suggestion still carries the originating template id", () => {
    const editedText = "What exactly are you cutting the onion with?";
    const message = questionFromSuggestion(suggestion, editedText);
    expect(message).toEqual(sentQuestions.edited);
    expect(message.kind).toBe("edit-question");

    expect(asked[1]).toEqual({
      text: editedText,
      slot: suggestion.requested_slot,
      provenance: suggestion.template_id,
      edited: true,
    });
  });

  it("a manual question is marked manual with no template id", () => {
    const message = manualQuestion("Is the stove already on?");
    expect(message).toEqual(sentQuestions.manual);

    expect(asked[2]).toEqual({
      text: "Is the stove already on?",
      slot: null,
      provenance: MANUAL_PROVENANCE,
      edited: false,
    });
  });

  it("provenance is never dropped anywhere in the log", () => {
    for (const payload of asked) {
      expect(payload.provenance.length).toBeGreaterThan(0);
      if (payload.edited) {
        // an edit without a template id is impossible to construct
        expect(payload.provenance).not.toBe(MANUAL_PROVENANCE);
      }
    }
  });
});

describe("client-side input validation", () => {
  it("blocks empty and whitespace-only question text", () => {
    expect(() => manualQuestion("")).toThrow("text must not be empty");
    expect(() => manualQuestion("   ")).toThrow("text must not be empty");
    expect(() => questionFromSuggestion(suggestion, "")).toThrow(
      "text must not be empty",
    );
  });

  it("trims the composed text before the edit check", () => {
    // trailing whitespace is not an edit
    const message = questionFromSuggestion(suggestion, suggestion.text + "  ");
    expect(message.kind).toBe("ask-question");
    expect(message).toEqual(sentQuestions.unedited);
  });
});
