/** Clarification round-trip against a scripted gateway: the view parks on
 * the question, the answer POST resumes the session, and the stream carries
 * it through to Done. */

import { createServer, type Server } from "node:http";
import { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { answerClarification, createSession, fetchReport } from "../src/api.js";
import { initialView, reduce } from "../src/reducer.js";
import { streamEvents } from "../src/sse.js";
import type { EventEnvelope } from "../src/types.js";

const SESSION_ID = "s-scripted-1";

function ev(seq: number, kind: string, payload: Record<string, any>): EventEnvelope {
  return { seq, kind, at: `1970-01-01T00:00:0${seq % 10}Z`, payload };
}

const PHASE_1: EventEnvelope[] = [
  ev(0, "phase_change", { from: null, to: "Objective", objective: "improve my enzyme" }),
  ev(1, "phase_change", { from: "Objective", to: "Research" }),
  ev(2, "prompt", { role: "PI", system: "..." }),
  ev(3, "response", { role: "PI", text: "...", parsed: { kind: "clarification" } }),
  ev(4, "clarification_request", {
    question: "Which property should be improved?",
    preliminary_plan: "Plan retrieval and prediction once clarified.",
  }),
  ev(5, "phase_change", { from: "Research", to: "AwaitingClarification" }),
];

const PHASE_2: EventEnvelope[] = [
  ev(6, "clarification_answer", { answer: "thermostability of P00734" }),
  ev(7, "phase_change", { from: "AwaitingClarification", to: "Research" }),
  ev(8, "response", { role: "PI", text: "[]", parsed: { kind: "empty" } }),
  ev(9, "phase_change", { from: "Research", to: "Summary" }),
  ev(10, "report", { text: "## Conclusions\n1. Start from a stability scan.", sections: ["Conclusions"], citations: [], references: [] }),
  ev(11, "phase_change", { from: "Summary", to: "Done" }),
];

class ScriptedGateway {
  answered = false;
  server: Server;

  constructor() {
    this.server = createServer((req, res) => {
      const url = req.url ?? "";
      if (req.method === "POST" && url === "/sessions") {
        res.writeHead(201, { "content-type": "application/json" });
        res.end(
          JSON.stringify({
            session_id: SESSION_ID,
            created_at: "1970-01-01T00:00:00Z",
            phase: "Objective",
            objective: "improve my enzyme",
          }),
        );
        return;
      }
      if (req.method === "POST" && url === `/sessions/${SESSION_ID}/clarification`) {
        if (this.answered) {
          res.writeHead(409).end();
          return;
        }
        this.answered = true;
        res.writeHead(202, { "content-type": "application/json" });
        res.end(JSON.stringify({ accepted: true }));
        return;
      }
      if (req.method === "GET" && url.startsWith(`/sessions/${SESSION_ID}/events`)) {
        const lastId = Number(req.headers["last-event-id"] ?? "-1");
        const events = (this.answered ? [...PHASE_1, ...PHASE_2] : PHASE_1).filter(
          (e) => e.seq > lastId,
        );
        res.writeHead(200, { "content-type": "text/event-stream" });
        for (const event of events) {
          res.write(`id: ${event.seq}\ndata: ${JSON.stringify(event)}\n\n`);
        }
        res.end(); // scripted gateway closes at pause and at terminal
        return;
      }
      if (req.method === "GET" && url === `/sessions/${SESSION_ID}/report`) {
        if (!this.answered) {
          res.writeHead(409).end();
          return;
        }
        res.writeHead(200, { "content-type": "application/json" });
        res.end(JSON.stringify(PHASE_2[4].payload));
        return;
      }
      res.writeHead(404).end();
    });
  }

  listen(): Promise<string> {
    return new Promise((resolve) => {
      this.server.listen(0, "127.0.0.1", () => {
        const { port } = this.server.address() as AddressInfo;
        resolve(`http://127.0.0.1:${port}`);
      });
    });
  }
}

describe("clarification round-trip", () => {
  const gateway = new ScriptedGateway();
  let baseUrl = "";

  beforeAll(async () => {
    baseUrl = await gateway.listen();
  });

  afterAll(() => {
    gateway.server.close();
  });

  it("completes and resumes the session", async () => {
    const handle = await createSession(baseUrl, "improve my enzyme");
    expect(handle.session_id).toBe(SESSION_ID);

    expect(await fetchReport(baseUrl, handle.session_id)).toBeNull(); // 409 before Summary

    let view = initialView();
    for await (const event of streamEvents(baseUrl, handle.session_id, { retryDelayMs: 5 })) {
      view = reduce(view, event);
      if (view.clarification && !gateway.answered) {
        expect(view.phase === "Research" || view.phase === "AwaitingClarification").toBe(true);
        const result = await answerClarification(
          baseUrl,
          handle.session_id,
          "thermostability of P00734",
        );
        expect(result.ok).toBe(true);
      }
    }

    expect(view.phase).toBe("Done");
    expect(view.clarification).toBeNull();
    expect(view.chat.map((m) => m.who)).toEqual(["user", "agent", "user"]);
    expect(view.report!.text).toContain("Conclusions");
    expect(view.lastSeq).toBe(11);

    const second = await answerClarification(baseUrl, handle.session_id, "again");
    expect(second.status).toBe(409);

    const report = await fetchReport(baseUrl, handle.session_id);
    expect(report).not.toBeNull();
  });
});
