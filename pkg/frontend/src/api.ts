// Thin typed wrappers over the service's HTTP endpoints. The UI is served
// from the same origin (the service mounts the bundle at /ui), so paths are
// origin-relative.

import type {
  AvoidAnswerJson,
  EventJson,
  FindAnswerJson,
  PoseJson,
  PoseResponseJson,
  SessionInfoJson,
  TopViewJson,
} from "./types.js";
import { createSseParser } from "./sse.js";

export class ApiError extends Error {
  status: number;
  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  const text = await resp.text();
  if (!resp.ok) {
    let detail = text;
    try {
      const parsed = JSON.parse(text) as { detail?: string };
      if (typeof parsed.detail === "string") detail = parsed.detail;
    } catch {
      // leave raw body as the message
    }
    throw new ApiError(resp.status, detail);
  }
  return JSON.parse(text) as T;
}

function post<T>(path: string, body: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export interface CreateSessionBody {
  scene?: unknown;
  cloud_path?: string;
  synth_seed?: number;
  oracle?: Record<string, unknown>;
  preprocess?: Record<string, unknown> | false;
  cluster?: Record<string, unknown>;
}

export function createSession(body: CreateSessionBody): Promise<SessionInfoJson> {
  return post("/sessions", body);
}

export function getTopview(
  sid: string,
): Promise<{ topview: TopViewJson; cache_hit: boolean }> {
  return request(`/sessions/${sid}/topview`);
}

export function postPose(sid: string, pose: PoseJson): Promise<PoseResponseJson> {
  return post(`/sessions/${sid}/pose`, pose);
}

export function queryAvoid(
  sid: string,
  range: number,
  style: string,
): Promise<AvoidAnswerJson> {
  return post(`/sessions/${sid}/query/avoid`, { range, style });
}

export function queryFind(
  sid: string,
  klass: string,
  corridorHalfwidth: number | null,
  style: string,
): Promise<FindAnswerJson> {
  const body: Record<string, unknown> = { class: klass, style };
  if (corridorHalfwidth !== null) body.corridor_halfwidth = corridorHalfwidth;
  return post(`/sessions/${sid}/query/find`, body);
}

/**
 * Consume the session event stream. Frames are decoded with the incremental
 * parser and handed to `onEvent` in arrival order; the caller is responsible
 * for sequence filtering. Resolves when the stream ends, throws on transport
 * failure.
 */
export async function streamEvents(
  sid: string,
  after: number,
  onEvent: (e: EventJson) => void,
  signal: AbortSignal,
  onOpen?: () => void,
): Promise<void> {
  const resp = await fetch(
    `/sessions/${sid}/events?follow=true&after=${after}`,
    { signal },
  );
  if (!resp.ok || resp.body === null) {
    throw new ApiError(resp.status, "event stream unavailable");
  }
  if (onOpen) onOpen();
  const reader = resp.body.getReader();
  const decoder = new TextDecoder();
  const parser = createSseParser();
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    for (const frame of parser.feed(decoder.decode(value, { stream: true }))) {
      onEvent(JSON.parse(frame.data) as EventJson);
    }
  }
}
