/** Fetch-based SSE client with lossless reconnect: every reconnect sends
 * Last-Event-ID so the gateway replays from the next sequence number. The
 * gateway closes streams at terminal phases and while a session waits on a
 * clarification answer; this client keeps re-subscribing until terminal. */

import { TERMINAL_PHASES, type EventEnvelope } from "./types.js";

export interface StreamOptions {
  fetchImpl?: typeof fetch;
  retryDelayMs?: number;
  signal?: AbortSignal;
}

export function parseFrames(buffer: string): { events: EventEnvelope[]; rest: string } {
  const events: EventEnvelope[] = [];
  const frames = buffer.split("\n\n");
  const rest = frames.pop() ?? "";
  for (const frame of frames) {
    for (const line of frame.split("\n")) {
      if (line.startsWith("data: ")) {
        events.push(JSON.parse(line.slice(6)) as EventEnvelope);
      }
    }
  }
  return { events, rest };
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export async function* streamEvents(
  baseUrl: string,
  sessionId: string,
  options: StreamOptions = {},
): AsyncGenerator<EventEnvelope> {
  const fetchImpl = options.fetchImpl ?? fetch;
  const retryDelayMs = options.retryDelayMs ?? 250;
  let lastSeq = -1;
  let phase = "Objective";

  while (!TERMINAL_PHASES.has(phase)) {
    if (options.signal?.aborted) {
      return;
    }
    const headers: Record<string, string> = {};
    if (lastSeq >= 0) {
      headers["Last-Event-ID"] = String(lastSeq);
    }
    let response: Response;
    try {
      response = await fetchImpl(`${baseUrl}/sessions/${sessionId}/events`, {
        headers,
        signal: options.signal,
      });
    } catch {
      await sleep(retryDelayMs);
      continue;
    }
    if (!response.ok || !response.body) {
      if (response.status === 404) {
        throw new Error(`unknown session ${sessionId}`);
      }
      await sleep(retryDelayMs);
      continue;
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    while (true) {
      const { done, value } = await reader.read();
      if (done) {
        break;
      }
      buffer += decoder.decode(value, { stream: true });
      const { events, rest } = parseFrames(buffer);
      buffer = rest;
      for (const event of events) {
        if (event.seq <= lastSeq) {
          continue; // replayed duplicate after reconnect
        }
        lastSeq = event.seq;
        if (event.kind === "phase_change") {
          phase = event.payload.to as string;
        }
        yield event;
      }
    }
    if (!TERMINAL_PHASES.has(phase)) {
      await sleep(retryDelayMs);
    }
  }
}
