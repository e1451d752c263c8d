/** Thin wrappers over the gateway's documented endpoints. */

import type { SessionHandle } from "./types.js";

export async function createSession(
  baseUrl: string,
  objective: string,
  fetchImpl: typeof fetch = fetch,
  contextNote = "",
): Promise<SessionHandle> {
  const config = contextNote ? { context_note: contextNote } : {};
  const response = await fetchImpl(`${baseUrl}/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ objective, config }),
  });
  if (!response.ok) {
    throw new Error(`create session failed: ${response.status}`);
  }
  return (await response.json()) as SessionHandle;
}

export async function answerClarification(
  baseUrl: string,
  sessionId: string,
  answer: string,
  fetchImpl: typeof fetch = fetch,
): Promise<{ ok: boolean; status: number }> {
  const response = await fetchImpl(`${baseUrl}/sessions/${sessionId}/clarification`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ answer }),
  });
  return { ok: response.status === 202, status: response.status };
}

export async function fetchReport(
  baseUrl: string,
  sessionId: string,
  fetchImpl: typeof fetch = fetch,
): Promise<Record<string, unknown> | null> {
  const response = await fetchImpl(`${baseUrl}/sessions/${sessionId}/report`);
  if (response.status === 409) {
    return null;
  }
  if (!response.ok) {
    throw new Error(`report fetch failed: ${response.status}`);
  }
  return (await response.json()) as Record<string, unknown>;
}
