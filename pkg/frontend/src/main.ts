// Page bootstrap: wires the DOM to the pure state/render modules. All state
// changes funnel through the reducers in state.ts on the single UI thread;
// this file only schedules network calls and repaints.

import {
  createSession,
  getTopview,
  postPose,
  queryAvoid,
  queryFind,
  streamEvents,
} from "./api.js";
import { anyActive, emptyKeys, keyFor, tick } from "./input.js";
import { renderScene } from "./render.js";
import type { Ctx2D } from "./render.js";
import { parseCommand, USAGE } from "./console.js";
import { speak } from "./speech.js";
import {
  ackPose,
  applyServerEvent,
  initialState,
  panBy,
  pruneFlashes,
  setAvoid,
  setBanner,
  setConnected,
  setFind,
  startSession,
  zoomBy,
} from "./state.js";
import type { ViewState } from "./state.js";
import type { EventJson } from "./types.js";

const TICK_MS = 100;
const RECONNECT_MS = 1500;

// Small office scene the Create button prefills; edit freely before creating.
const DEMO_SPEC = {
  room: [8, 8, 2.6],
  background_density: 60,
  objects: [
    { class: "desk", box_min: [4.2, 3.6, 0.0], box_max: [4.8, 4.4, 0.75], density: 40000 },
    { class: "chair", box_min: [3.2, 3.8, 0.0], box_max: [3.7, 4.3, 0.45], density: 40000 },
    { class: "sofa", box_min: [1.0, 6.0, 0.0], box_max: [2.3, 6.7, 0.8], density: 40000 },
    { class: "door", box_min: [6.8, 0.9, 0.0], box_max: [7.7, 1.0, 2.0], density: 40000 },
  ],
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let state: ViewState = initialState();
const keys = emptyKeys();
let inputPaused = false;
let poseInFlight = false;
let streamAbort: AbortController | null = null;

const canvas = el<HTMLCanvasElement>("wheel");
const bannerBox = el<HTMLDivElement>("banner");
const connBadge = el<HTMLSpanElement>("conn");
const sessionLine = el<HTMLSpanElement>("session-line");
const specBox = el<HTMLTextAreaElement>("spec-json");
const cloudPathBox = el<HTMLInputElement>("cloud-path");
const seedBox = el<HTMLInputElement>("seed");
const createBtn = el<HTMLButtonElement>("create");
const reconnectBtn = el<HTMLButtonElement>("reconnect");
const consoleForm = el<HTMLFormElement>("console-form");
const consoleInput = el<HTMLInputElement>("console-input");
const consoleLog = el<HTMLUListElement>("console-log");
const styleSelect = el<HTMLSelectElement>("style");
const speakBox = el<HTMLInputElement>("speak");
const narrationList = el<HTMLOListElement>("narration");
const feedList = el<HTMLUListElement>("feed");
const statusLine = el<HTMLSpanElement>("status-line");

specBox.value = JSON.stringify(DEMO_SPEC, null, 2);

function sid(): string | null {
  return state.session ? state.session.id : null;
}

function logLine(text: string, cls: string): void {
  const li = document.createElement("li");
  li.textContent = text;
  li.className = cls;
  consoleLog.appendChild(li);
  while (consoleLog.children.length > 100) consoleLog.removeChild(consoleLog.firstChild!);
  consoleLog.scrollTop = consoleLog.scrollHeight;
}

function showNarration(lines: string[]): void {
  narrationList.textContent = "";
  for (const line of lines) {
    const li = document.createElement("li");
    li.textContent = line;
    narrationList.appendChild(li);
  }
  speak(lines, speakBox.checked);
}

function appendFeedRow(e: EventJson): void {
  const li = document.createElement("li");
  const body = JSON.stringify(e.payload);
  li.textContent = `#${e.seq} ${e.kind} ${body.length > 80 ? body.slice(0, 80) + "…" : body}`;
  li.className = e.kind === "collision" ? "collision" : "";
  feedList.appendChild(li);
  while (feedList.children.length > 200) feedList.removeChild(feedList.firstChild!);
  feedList.scrollTop = feedList.scrollHeight;
}

function refreshChrome(): void {
  connBadge.textContent = state.connected ? "live" : "offline";
  connBadge.className = state.connected ? "badge ok" : "badge bad";
  if (state.banner) {
    bannerBox.textContent = state.banner;
    bannerBox.classList.remove("hidden");
    reconnectBtn.classList.toggle("hidden", !inputPaused);
  } else {
    bannerBox.classList.add("hidden");
    reconnectBtn.classList.add("hidden");
  }
}

function paint(): void {
  state = pruneFlashes(state, Date.now());
  const rect = canvas.getBoundingClientRect();
  if (canvas.width !== Math.floor(rect.width) || canvas.height !== Math.floor(rect.height)) {
    canvas.width = Math.floor(rect.width);
    canvas.height = Math.floor(rect.height);
  }
  const ctx = canvas.getContext("2d");
  if (ctx) {
    renderScene(ctx as unknown as Ctx2D, state.scene, {
      width: canvas.width,
      height: canvas.height,
      camera: state.camera,
      flashes: state.flashes,
      avoid: state.lastAvoid,
      find: state.lastFind,
    });
  }
  requestAnimationFrame(paint);
}

function pauseInput(reason: string): void {
  inputPaused = true;
  keys.forward = keys.back = keys.left = keys.right = false;
  state = setBanner(setConnected(state, false), reason);
  refreshChrome();
}

async function runStream(sessionId: string): Promise<void> {
  streamAbort?.abort();
  const abort = new AbortController();
  streamAbort = abort;
  for (;;) {
    if (abort.signal.aborted || sid() !== sessionId) return;
    try {
      await streamEvents(
        sessionId,
        state.lastSeq < 0 ? 0 : state.lastSeq,
        (e) => {
          const before = state.lastSeq;
          state = applyServerEvent(state, e, Date.now());
          if (state.lastSeq !== before) appendFeedRow(e);
        },
        abort.signal,
        () => {
          inputPaused = false;
          state = setBanner(setConnected(state, true), null);
          refreshChrome();
        },
      );
    } catch {
      if (abort.signal.aborted) return;
      pauseInput("connection lost, input paused; retrying…");
    }
    await new Promise((r) => setTimeout(r, RECONNECT_MS));
  }
}

createBtn.addEventListener("click", async () => {
  const body: Record<string, unknown> = {};
  const cloudPath = cloudPathBox.value.trim();
  if (cloudPath) {
    body.cloud_path = cloudPath;
  } else {
    try {
      body.scene = JSON.parse(specBox.value);
    } catch (err) {
      logLine(`scene spec is not valid JSON: ${String(err)}`, "error");
      return;
    }
    body.synth_seed = Number(seedBox.value) || 0;
  }
  createBtn.disabled = true;
  sessionLine.textContent = "creating…";
  try {
    const info = await createSession(body);
    const tv = await getTopview(info.id);
    state = startSession(state, info, tv.topview);
    sessionLine.textContent =
      `${info.id} · ${info.n_points.toLocaleString()} points · ` +
      `${info.n_instances} instances · ${info.timing.total.toFixed(2)}s`;
    feedList.textContent = "";
    narrationList.textContent = "";
    inputPaused = false;
    void runStream(info.id);
  } catch (err) {
    sessionLine.textContent = "no session";
    logLine(`session create failed: ${err instanceof Error ? err.message : String(err)}`, "error");
  } finally {
    createBtn.disabled = false;
  }
});

reconnectBtn.addEventListener("click", () => {
  const s = sid();
  if (s) void runStream(s);
});

consoleForm.addEventListener("submit", async (ev) => {
  ev.preventDefault();
  const s = sid();
  const text = consoleInput.value;
  consoleInput.value = "";
  if (!s) {
    logLine("create a session first", "error");
    return;
  }
  const cmd = parseCommand(text);
  if (cmd.kind === "error") {
    logLine(cmd.message, "error");
    return;
  }
  logLine(`> ${text.trim()}`, "cmd");
  try {
    if (cmd.kind === "avoid") {
      const a = await queryAvoid(s, cmd.range, styleSelect.value);
      state = setAvoid(state, a);
      showNarration(a.narration);
      for (const line of a.narration) logLine(line, "answer");
    } else {
      const a = await queryFind(s, cmd.klass, cmd.halfWidth, styleSelect.value);
      state = setFind(state, a);
      showNarration(a.narration);
      // a miss is information, not an error
      const cls = a.found ? "answer" : "info";
      for (const line of a.narration) logLine(line, cls);
    }
  } catch (err) {
    logLine(err instanceof Error ? err.message : String(err), "error");
  }
});

window.addEventListener("keydown", (e) => {
  const target = e.target as HTMLElement | null;
  if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) return;
  const k = keyFor(e.code);
  if (!k) return;
  e.preventDefault();
  keys[k] = true;
});

window.addEventListener("keyup", (e) => {
  const k = keyFor(e.code);
  if (k) keys[k] = false;
});

setInterval(() => {
  const s = sid();
  if (!s || inputPaused || poseInFlight || !anyActive(keys)) return;
  const base = state.poseAcked ?? (state.scene ? state.scene.pose : null);
  if (!base) return;
  const next = tick(base, keys);
  poseInFlight = true;
  postPose(s, next)
    .then((resp) => {
      state = ackPose(state, resp);
      statusLine.textContent =
        `pose (${resp.topview.pose.x.toFixed(2)}, ${resp.topview.pose.y.toFixed(2)}) · ` +
        `${resp.cache_hit ? "cached" : `${(resp.seconds * 1000).toFixed(0)} ms`}` +
        (resp.collisions.length ? ` · collision: ${resp.collisions[0].class}` : "");
    })
    .catch((err) => {
      pauseInput(
        `pose update failed (${err instanceof Error ? err.message : String(err)}), input paused`,
      );
    })
    .finally(() => {
      poseInFlight = false;
    });
}, TICK_MS);

let dragging: { x: number; y: number } | null = null;
canvas.addEventListener("pointerdown", (e) => {
  dragging = { x: e.clientX, y: e.clientY };
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  state = panBy(state, e.clientX - dragging.x, e.clientY - dragging.y);
  dragging = { x: e.clientX, y: e.clientY };
});
canvas.addEventListener("pointerup", () => {
  dragging = null;
});
canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  state = zoomBy(state, e.deltaY < 0 ? 1.1 : 1 / 1.1);
});
canvas.addEventListener("dblclick", () => {
  state = { ...state, camera: { panX: 0, panY: 0, zoom: 1 } };
});

logLine(USAGE, "info");
refreshChrome();
requestAnimationFrame(paint);
