/** Browser entry point: submit an objective, stream the session live,
 * answer clarifications, and show the audited report. */

import { answerClarification, createSession } from "./api.js";
import { initialView, reduce } from "./reducer.js";
import { renderView } from "./render.js";
import { streamEvents } from "./sse.js";
import type { SessionView } from "./types.js";

const BASE_URL = "";

// A follow-up typed after a completed session spawns a new session seeded
// with a one-line summary of the previous one.
let lastCompleted: { sessionId: string; summary: string } | null = null;

function mount(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  root.innerHTML = `
    <h1>protlab console</h1>
    <form id="objective-form">
      <input id="objective" placeholder="Describe the research objective" size="70"/>
      <button type="submit">Start session</button>
    </form>
    <main id="session"></main>
  `;
  const form = document.getElementById("objective-form") as HTMLFormElement;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const input = document.getElementById("objective") as HTMLInputElement;
    if (input.value.trim()) {
      void runSession(input.value.trim());
    }
  });
}

async function runSession(objective: string): Promise<void> {
  const container = document.getElementById("session")!;
  const contextNote = lastCompleted
    ? `Follow-up of session ${lastCompleted.sessionId}. ${lastCompleted.summary}`
    : "";
  const handle = await createSession(BASE_URL, objective, fetch, contextNote);
  let view: SessionView = initialView();

  const paint = () => {
    container.innerHTML = renderView(view);
    const button = document.getElementById("send-answer");
    button?.addEventListener("click", async () => {
      const input = document.getElementById("answer") as HTMLInputElement;
      if (!input.value.trim()) {
        return;
      }
      const result = await answerClarification(BASE_URL, handle.session_id, input.value.trim());
      if (!result.ok) {
        input.placeholder = `rejected (${result.status}); session not awaiting`;
        input.value = "";
      }
    });
  };
  paint();

  for await (const event of streamEvents(BASE_URL, handle.session_id)) {
    view = reduce(view, event);
    paint();
  }
  if (view.phase === "Done" && view.report) {
    const firstLine =
      view.report.text.split("\n").find((line) => /^\d+\./.test(line.trim())) ?? "";
    lastCompleted = { sessionId: handle.session_id, summary: firstLine.trim() };
  }
}

mount();
