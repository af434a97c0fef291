/**
 * Pure HTML rendering of the view models.
 *
 * String in, string out: the host page assigns the result to a container's
 * innerHTML and wires its buttons to the console methods (data-* attributes
 * carry the arguments). Keeping the renderer pure means the headless tests
 * exercise exactly what the browser shows.
 */

import type { SpecDocument, VideoCommand } from "./protocol.js";
import { VIDEO_COMMANDS } from "./protocol.js";
import type { PerformerViewModel, WizardViewModel } from "./viewmodel.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function specListHtml(
  spec: SpecDocument,
  highlighted: number | null,
  confirmed: readonly number[],
  scores: readonly number[],
): string {
  const rows = spec.items.map((item) => {
    const classes = ["spec-item"];
    if (item.index === highlighted) classes.push("highlighted");
    if (confirmed.includes(item.index)) classes.push("confirmed");
    const score = scores[item.index];
    const bar =
      score === undefined
        ? ""
        : `<span class="score-bar" style="width:${Math.round(
            Math.max(0, Math.min(1, (score + 1) / 2)) * 100,
          )}%"></span><span class="score">${score.toFixed(3)}</span>`;
    return `<li class="${classes.join(" ")}" data-item="${item.index}">${escapeHtml(
      item.text,
    )}${bar}</li>`;
  });
  return `<ol class="spec">${rows.join("")}</ol>`;
}

function conversationHtml(view: WizardViewModel | PerformerViewModel): string {
  const rows = view.conversation.map(
    (entry) =>
      `<li class="turn ${entry.speaker} ${entry.kind}">${escapeHtml(entry.text)}</li>`,
  );
  return `<ul class="conversation">${rows.join("")}</ul>`;
}

export function renderWizardHtml(
  view: WizardViewModel,
  spec: SpecDocument,
  utteranceCatalog: Record<string, string> = {},
): string {
  const badge = view.estimateBadge
    ? `<div class="badge error">${escapeHtml(view.estimateBadge)}</div>`
    : "";

  const transcript = view.transcript
    .map((line) => `<li>${escapeHtml(line.text)}</li>`)
    .join("");

  const slots = Object.entries(view.frameSlots)
    .map(
      ([slot, spans]) =>
        `<tr><th>${escapeHtml(slot)}</th><td>${spans
          .map(escapeHtml)
          .join("; ")}</td></tr>`,
    )
    .join("");
  const missing = view.missingSlots
    .map((slot) => `<span class="missing-slot">${escapeHtml(slot)}</span>`)
    .join("");

  const suggestions = view.suggestions
    .map(
      (q, i) =>
        `<li class="suggestion" data-suggestion="${i}">` +
        `<input value="${escapeHtml(q.text)}" data-template="${escapeHtml(
          q.template_id,
        )}" data-slot="${escapeHtml(q.requested_slot)}">` +
        `<button data-send-suggestion="${i}">ask</button></li>`,
    )
    .join("");

  const utterances = Object.entries(utteranceCatalog)
    .map(
      ([id, text]) =>
        `<button class="utterance" data-utterance="${escapeHtml(id)}">${escapeHtml(
          text,
        )}</button>`,
    )
    .join("");

  const controls = VIDEO_COMMANDS.map(
    (cmd: VideoCommand) => `<button data-video="${cmd}">${cmd}</button>`,
  ).join("");

  return [
    `<section class="estimate">${badge}${specListHtml(
      spec,
      view.highlightedItem,
      view.confirmedItems,
      view.estimateScores,
    )}</section>`,
    `<section class="transcript"><ul>${transcript}</ul></section>`,
    `<section class="frame"><table>${slots}</table><div class="missing">${missing}</div></section>`,
    `<section class="suggestions"><ul>${suggestions}</ul></section>`,
    `<section class="utterances">${utterances}</section>`,
    `<section class="video-controls">${controls}</section>`,
    `<section class="log">${conversationHtml(view)}</section>`,
  ].join("\n");
}

export function renderPerformerHtml(
  view: PerformerViewModel,
  spec: SpecDocument,
): string {
  const media = `<section class="media"><video class="player" data-last-cmd="${
    view.videoCommand?.cmd ?? ""
  }"></video></section>`;

  const item =
    view.highlightedItem === null ? null : spec.items[view.highlightedItem];
  const action =
    item && view.currentActionLabel !== null
      ? item.actions[view.currentActionLabel]
      : null;
  const image = item?.image_ref
    ? `<img class="step-image" src="${escapeHtml(item.image_ref)}">`
    : "";

  return [
    media,
    `<section class="estimate">${specListHtml(
      spec,
      view.highlightedItem,
      view.confirmedItems,
      [],
    )}</section>`,
    `<section class="action">${action ? escapeHtml(action.text) : ""}${image}</section>`,
    `<section class="log">${conversationHtml(view)}</section>`,
  ].join("\n");
}
