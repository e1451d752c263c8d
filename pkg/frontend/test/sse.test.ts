import { describe, expect, it } from "vitest";

import { parseFrames, streamEvents } from "../src/sse.js";
import type { EventEnvelope } from "../src/types.js";

function envelope(seq: number, kind = "prompt", payload: Record<string, any> = {}): EventEnvelope {
  return { seq, kind, at: "1970-01-01T00:00:00Z", payload };
}

function frame(e: EventEnvelope): string {
  return `id: ${e.seq}\ndata: ${JSON.stringify(e)}\n\n`;
}

function sseResponse(frames: string[]): Response {
  const encoder = new TextEncoder();
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of frames) {
        controller.enqueue(encoder.encode(chunk));
      }
      controller.close();
    },
  });
  return new Response(body, { status: 200, headers: { "content-type": "text/event-stream" } });
}

describe("parseFrames", () => {
  it("parses complete frames and keeps the partial tail", () => {
    const a = envelope(0);
    const b = envelope(1);
    const text = frame(a) + frame(b) + "id: 2\nda";
    const { events, rest } = parseFrames(text);
    expect(events.map((e) => e.seq)).toEqual([0, 1]);
    expect(rest).toBe("id: 2\nda");
  });

  it("handles frames split across chunk boundaries", () => {
    const whole = frame(envelope(0));
    const first = parseFrames(whole.slice(0, 12));
    expect(first.events).toEqual([]);
    const second = parseFrames(first.rest + whole.slice(12));
    expect(second.events.map((e) => e.seq)).toEqual([0]);
  });
});

describe("streamEvents reconnect", () => {
  it("resumes with Last-Event-ID and never duplicates or drops", async () => {
    const all: EventEnvelope[] = [
      envelope(0, "phase_change", { to: "Research" }),
      envelope(1),
      envelope(2),
      envelope(3),
      envelope(4, "phase_change", { to: "Done" }),
    ];
    const requests: Array<string | null> = [];
    const fetchImpl: typeof fetch = async (_url, init) => {
      const headers = (init?.headers ?? {}) as Record<string, string>;
      const lastId = headers["Last-Event-ID"] ?? null;
      requests.push(lastId);
      if (lastId === null) {
        // first connection drops mid-stream after two events
        return sseResponse(all.slice(0, 2).map(frame));
      }
      const from = Number(lastId) + 1;
      return sseResponse(all.slice(from).map(frame));
    };

    const seen: number[] = [];
    for await (const event of streamEvents("http://gw.test", "s1", {
      fetchImpl,
      retryDelayMs: 1,
    })) {
      seen.push(event.seq);
    }
    expect(seen).toEqual([0, 1, 2, 3, 4]);
    expect(requests[0]).toBeNull();
    expect(requests[1]).toBe("1");
  });

  it("skips events replayed twice by an overlapping reconnect", async () => {
    const all = [envelope(0), envelope(1, "phase_change", { to: "Done" })];
    let call = 0;
    const fetchImpl: typeof fetch = async () => {
      call += 1;
      if (call === 1) {
        return sseResponse([frame(all[0])]);
      }
      return sseResponse(all.map(frame)); // overlap: resends seq 0
    };
    const seen: number[] = [];
    for await (const event of streamEvents("http://gw.test", "s1", {
      fetchImpl,
      retryDelayMs: 1,
    })) {
      seen.push(event.seq);
    }
    expect(seen).toEqual([0, 1]);
  });

  it("raises on an unknown session", async () => {
    const fetchImpl: typeof fetch = async () => new Response("", { status: 404 });
    const iterate = async () => {
      for await (const _ of streamEvents("http://gw.test", "missing", { fetchImpl })) {
        // unreachable
      }
    };
    await expect(iterate()).rejects.toThrow(/unknown session/);
  });
});
