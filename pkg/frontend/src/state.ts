// View state and its reducers. Every mutation of what the page shows goes
// through the pure functions here; DOM wiring in main.ts only calls them and
// repaints. Events are applied strictly in sequence order, so a reconnect
// that replays part of the feed cannot double-apply anything.

import type {
  AvoidAnswerJson,
  EventJson,
  FindAnswerJson,
  PoseJson,
  PoseResponseJson,
  SessionInfoJson,
  TopViewJson,
} from "./types.js";

export const FLASH_MS = 600;
export const FEED_CAP = 200;

export interface Flash {
  class: string;
  range: number;
  sector: number;
  seq: number;
  until: number;
}

export interface Camera {
  panX: number;
  panY: number;
  zoom: number;
}

export interface ViewState {
  session: SessionInfoJson | null;
  camera: Camera;
  /** Pose mirrored from the server's last acknowledgement. */
  poseAcked: PoseJson | null;
  scene: TopViewJson | null;
  lastAvoid: AvoidAnswerJson | null;
  lastFind: FindAnswerJson | null;
  feed: EventJson[];
  lastSeq: number;
  flashes: Flash[];
  banner: string | null;
  connected: boolean;
}

export function initialState(): ViewState {
  return {
    session: null,
    camera: { panX: 0, panY: 0, zoom: 1 },
    poseAcked: null,
    scene: null,
    lastAvoid: null,
    lastFind: null,
    feed: [],
    lastSeq: -1,
    flashes: [],
    banner: null,
    connected: false,
  };
}

export function startSession(
  s: ViewState,
  info: SessionInfoJson,
  scene: TopViewJson,
): ViewState {
  return {
    ...initialState(),
    session: info,
    scene,
    poseAcked: scene.pose,
    connected: s.connected,
  };
}

/**
 * Apply one feed event. Out-of-order or replayed events (seq at or below the
 * last applied one) are dropped, which keeps collision flashes at exactly one
 * per collision event however often the stream is re-read.
 */
export function applyServerEvent(
  s: ViewState,
  e: EventJson,
  nowMs: number,
): ViewState {
  if (e.seq <= s.lastSeq) return s;
  const feed = [...s.feed, e];
  if (feed.length > FEED_CAP) feed.splice(0, feed.length - FEED_CAP);
  let flashes = s.flashes;
  if (e.kind === "collision") {
    const p = e.payload as { class?: unknown; range?: unknown; sector?: unknown };
    flashes = [
      ...s.flashes,
      {
        class: typeof p.class === "string" ? p.class : "?",
        range: typeof p.range === "number" ? p.range : 0,
        sector: typeof p.sector === "number" ? p.sector : -1,
        seq: e.seq,
        until: nowMs + FLASH_MS,
      },
    ];
  }
  return { ...s, feed, flashes, lastSeq: e.seq };
}

/** Adopt a pose acknowledgement: the response's scene is the new truth. */
export function ackPose(s: ViewState, resp: PoseResponseJson): ViewState {
  return { ...s, poseAcked: resp.topview.pose, scene: resp.topview };
}

export function setAvoid(s: ViewState, a: AvoidAnswerJson): ViewState {
  return { ...s, lastAvoid: a, lastFind: null };
}

export function setFind(s: ViewState, a: FindAnswerJson): ViewState {
  return { ...s, lastFind: a, lastAvoid: null };
}

export function setBanner(s: ViewState, banner: string | null): ViewState {
  return { ...s, banner };
}

export function setConnected(s: ViewState, connected: boolean): ViewState {
  return { ...s, connected };
}

export function pruneFlashes(s: ViewState, nowMs: number): ViewState {
  const keep = s.flashes.filter((f) => f.until > nowMs);
  return keep.length === s.flashes.length ? s : { ...s, flashes: keep };
}

export function panBy(s: ViewState, dx: number, dy: number): ViewState {
  return { ...s, camera: { ...s.camera, panX: s.camera.panX + dx, panY: s.camera.panY + dy } };
}

const ZOOM_MIN = 0.25;
const ZOOM_MAX = 8;

export function zoomBy(s: ViewState, factor: number): ViewState {
  const zoom = Math.min(ZOOM_MAX, Math.max(ZOOM_MIN, s.camera.zoom * factor));
  return { ...s, camera: { ...s.camera, zoom } };
}
