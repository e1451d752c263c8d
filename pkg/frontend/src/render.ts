/** Render the session view as HTML. Pure string rendering keeps the view
 * logic snapshot-testable; main.ts owns DOM wiring. */

import type { SessionView } from "./types.js";

const STATUS_ICONS: Record<string, string> = {
  pending: "·",
  running: "▶",
  retrying: "↻",
  success: "✓",
  failed: "✗",
  "goal-unmet": "!",
};

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderView(view: SessionView): string {
  const chat = view.chat
    .map((m) => `<div class="msg ${m.who}"><b>${m.who}</b>: ${escapeHtml(m.text)}</div>`)
    .join("\n");

  const plan = view.plan
    .map(
      (s) =>
        `<li class="step ${s.status}" data-step="${s.step}">` +
        `<span class="icon">${STATUS_ICONS[s.status] ?? "?"}</span> ` +
        `<code>${escapeHtml(s.toolName)}</code> ${escapeHtml(s.label)}` +
        (s.attempts > 1 ? ` <em>(${s.attempts} attempts)</em>` : "") +
        `</li>`,
    )
    .join("\n");

  const clarification = view.clarification
    ? `<div class="clarification"><p>${escapeHtml(view.clarification.question)}</p>` +
      `<input id="answer" placeholder="your answer"/><button id="send-answer">Answer</button></div>`
    : "";

  const artifacts = Object.entries(view.artifacts)
    .map(
      ([step, artifact]) =>
        `<details class="artifact"><summary>step ${step} output</summary>` +
        `<pre>${escapeHtml(JSON.stringify(artifact, null, 2))}</pre></details>`,
    )
    .join("\n");

  const report = view.report
    ? `<section class="report"><pre>${escapeHtml(view.report.text)}</pre>` +
      `<ol class="refs">${view.report.references
        .map((r) => `<li><a href="${escapeHtml(r.url)}">${escapeHtml(r.title)}</a></li>`)
        .join("")}</ol></section>`
    : "";

  const failure = view.failure
    ? `<div class="failure">session failed: ${escapeHtml(view.failure)}</div>`
    : "";

  return [
    `<header><span class="phase badge-${view.phase.toLowerCase()}">${view.phase}</span></header>`,
    `<section class="chat">${chat}</section>`,
    clarification,
    `<ol class="plan">${plan}</ol>`,
    `<section class="artifacts">${artifacts}</section>`,
    failure,
    report,
  ].join("\n");
}
