// Immediate-mode drawing of the top view. Everything here is a rendering
// transform of server-provided numbers: sector indices become wedge angles,
// ego-frame metres become canvas pixels. No free-space or range decision is
// recomputed client-side.
//
// renderScene returns a summary of what it drew so the drawing rules can be
// unit tested against a recording context without a real canvas.

import type {
  AvoidAnswerJson,
  FindAnswerJson,
  InstanceJson,
} from "./types.js";
import { SECTOR_COUNT, isTopViewJson } from "./types.js";
import type { Flash, Camera } from "./state.js";
import {
  egoToCanvas,
  rayPoint,
  sectorRayAngle,
  sectorWedgeAngles,
} from "./wheel.js";

// Minimal slice of CanvasRenderingContext2D used by the renderer; tests
// substitute a recording object.
export interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  save(): void;
  restore(): void;
  setLineDash(segments: number[]): void;
  fillText(text: string, x: number, y: number): void;
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

export interface RenderOptions {
  width: number;
  height: number;
  camera: Camera;
  flashes: Flash[];
  avoid: AvoidAnswerJson | null;
  find: FindAnswerJson | null;
}

export interface Marker {
  class: string;
  x: number;
  y: number;
}

export interface RenderSummary {
  error: boolean;
  idle: boolean;
  wedges: number;
  hatchedSectors: number[];
  occupiedSectors: number[];
  suggestedSectors: number[];
  alertSectors: number[];
  markers: Marker[];
  corridor: { sector: number; x: number; y: number } | null;
  flashedClasses: string[];
}

const COLORS = {
  scanned: "#223140",
  unscanned: "#16181c",
  hatch: "#3a3f46",
  occupied: "rgba(182, 104, 60, 0.35)",
  suggested: "#4caf7d",
  fallback: "#8aa0b8",
  alert: "#d9822b",
  corridor: "#58a6ff",
  grid: "#2b2f36",
  instance: "#d7dde4",
  closest: "#ffd166",
  flash: "#e5484d",
  avatar: "#58a6ff",
  text: "#aab4c0",
  error: "#e5484d",
};

export const BASE_SCALE_PX_PER_M = 40;

function emptySummary(): RenderSummary {
  return {
    error: false,
    idle: false,
    wedges: 0,
    hatchedSectors: [],
    occupiedSectors: [],
    suggestedSectors: [],
    alertSectors: [],
    markers: [],
    corridor: null,
    flashedClasses: [],
  };
}

function wedgePath(
  ctx: Ctx2D,
  cx: number,
  cy: number,
  r0: number,
  r1: number,
  sector: number,
): void {
  const { start, end } = sectorWedgeAngles(sector);
  ctx.beginPath();
  ctx.moveTo(cx + r0 * Math.cos(start), cy + r0 * Math.sin(start));
  ctx.lineTo(cx + r1 * Math.cos(start), cy + r1 * Math.sin(start));
  ctx.arc(cx, cy, r1, start, end);
  ctx.lineTo(cx + r0 * Math.cos(end), cy + r0 * Math.sin(end));
  ctx.closePath();
}

function drawHatch(
  ctx: Ctx2D,
  cx: number,
  cy: number,
  radius: number,
  sector: number,
): void {
  ctx.save();
  ctx.strokeStyle = COLORS.hatch;
  ctx.lineWidth = 1;
  ctx.setLineDash([4, 4]);
  const { start, end } = sectorWedgeAngles(sector);
  for (let i = 1; i <= 3; i++) {
    const a = start + ((end - start) * i) / 4;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + radius * Math.cos(a), cy + radius * Math.sin(a));
    ctx.stroke();
  }
  ctx.setLineDash([]);
  ctx.restore();
}

function drawAvatar(ctx: Ctx2D, cx: number, cy: number): void {
  ctx.save();
  ctx.fillStyle = COLORS.avatar;
  ctx.beginPath();
  ctx.moveTo(cx, cy - 10);
  ctx.lineTo(cx - 6, cy + 7);
  ctx.lineTo(cx + 6, cy + 7);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}

function drawInstance(
  ctx: Ctx2D,
  inst: InstanceJson,
  scale: number,
  cx: number,
  cy: number,
  flashed: boolean,
  summary: RenderSummary,
): void {
  const fp = inst.feature_points;
  ctx.save();
  ctx.fillStyle = COLORS.instance;
  for (const key of ["x_min", "x_max", "y_min", "y_max"] as const) {
    const p = egoToCanvas(fp[key], scale, cx, cy);
    ctx.beginPath();
    ctx.arc(p.x, p.y, 2, 0, Math.PI * 2);
    ctx.fill();
  }
  const closest = egoToCanvas(fp.closest, scale, cx, cy);
  ctx.fillStyle = COLORS.closest;
  ctx.beginPath();
  ctx.arc(closest.x, closest.y, 4, 0, Math.PI * 2);
  ctx.fill();
  if (flashed) {
    ctx.strokeStyle = COLORS.flash;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.arc(closest.x, closest.y, 9, 0, Math.PI * 2);
    ctx.stroke();
    summary.flashedClasses.push(inst.class);
  }
  ctx.fillStyle = COLORS.text;
  ctx.font = "12px sans-serif";
  ctx.fillText(`${inst.class} ${inst.range_m.toFixed(1)}m`, closest.x + 8, closest.y - 6);
  ctx.restore();
  summary.markers.push({ class: inst.class, x: closest.x, y: closest.y });
}

/**
 * Draw one frame. `scene` is whatever the server last sent: invalid payloads
 * produce an error banner and nothing else, null means no session yet.
 */
export function renderScene(
  ctx: Ctx2D,
  scene: unknown,
  opts: RenderOptions,
): RenderSummary {
  const summary = emptySummary();
  ctx.clearRect(0, 0, opts.width, opts.height);

  if (scene === null || scene === undefined) {
    summary.idle = true;
    ctx.save();
    ctx.fillStyle = COLORS.text;
    ctx.font = "14px sans-serif";
    ctx.fillText("no session", opts.width / 2 - 40, opts.height / 2);
    ctx.restore();
    return summary;
  }
  if (!isTopViewJson(scene)) {
    summary.error = true;
    ctx.save();
    ctx.fillStyle = COLORS.error;
    ctx.font = "14px sans-serif";
    ctx.fillText("malformed scene payload", 16, 24);
    ctx.restore();
    return summary;
  }

  const cx = opts.width / 2 + opts.camera.panX;
  const cy = opts.height / 2 + opts.camera.panY;
  const scale = BASE_SCALE_PX_PER_M * opts.camera.zoom;
  const wheelR = Math.min(opts.width, opts.height) * 0.46;

  const scanned = new Set(scene.scanned_sectors);
  for (let s = 0; s < SECTOR_COUNT; s++) {
    ctx.save();
    ctx.fillStyle = scanned.has(s) ? COLORS.scanned : COLORS.unscanned;
    wedgePath(ctx, cx, cy, 0, wheelR, s);
    ctx.fill();
    ctx.strokeStyle = COLORS.grid;
    ctx.lineWidth = 1;
    ctx.stroke();
    ctx.restore();
    summary.wedges += 1;
    if (!scanned.has(s)) {
      drawHatch(ctx, cx, cy, wheelR, s);
      summary.hatchedSectors.push(s);
    }
  }

  // range rings every metre out to the wheel edge
  ctx.save();
  ctx.strokeStyle = COLORS.grid;
  ctx.lineWidth = 1;
  for (let m = 1; m * scale < wheelR; m++) {
    ctx.beginPath();
    ctx.arc(cx, cy, m * scale, 0, Math.PI * 2);
    ctx.stroke();
  }
  ctx.restore();

  const occupied = new Set<number>();
  for (const inst of scene.instances) {
    for (const s of inst.occupied_sectors) occupied.add(s);
  }
  for (const s of occupied) {
    ctx.save();
    ctx.fillStyle = COLORS.occupied;
    wedgePath(ctx, cx, cy, 0, wheelR, s);
    ctx.fill();
    ctx.restore();
    summary.occupiedSectors.push(s);
  }
  summary.occupiedSectors.sort((a, b) => a - b);

  if (opts.avoid) {
    const picks = opts.avoid.suggested.length
      ? opts.avoid.suggested
      : opts.avoid.fallback_unscanned;
    const color = opts.avoid.suggested.length ? COLORS.suggested : COLORS.fallback;
    for (const s of picks) {
      ctx.save();
      ctx.strokeStyle = color;
      ctx.lineWidth = 3;
      wedgePath(ctx, cx, cy, 0, wheelR, s);
      ctx.stroke();
      ctx.restore();
      summary.suggestedSectors.push(s);
    }
  }

  if (opts.find) {
    for (const alert of opts.find.alerts) {
      ctx.save();
      ctx.strokeStyle = COLORS.alert;
      ctx.lineWidth = 2;
      wedgePath(ctx, cx, cy, 0, wheelR, alert.sector);
      ctx.stroke();
      ctx.restore();
      summary.alertSectors.push(alert.sector);
    }
    if (opts.find.found && opts.find.target) {
      const t = opts.find.target;
      const tip = rayPoint(t.sector, t.range_m, scale, cx, cy);
      ctx.save();
      ctx.strokeStyle = COLORS.corridor;
      ctx.lineWidth = 2;
      ctx.setLineDash([6, 4]);
      ctx.beginPath();
      ctx.moveTo(cx, cy);
      ctx.lineTo(tip.x, tip.y);
      ctx.stroke();
      ctx.setLineDash([]);
      ctx.lineWidth = 3;
      wedgePath(ctx, cx, cy, 0, wheelR, t.sector);
      ctx.stroke();
      ctx.restore();
      summary.corridor = { sector: t.sector, x: tip.x, y: tip.y };
    }
  }

  const flashedClasses = new Set(opts.flashes.map((f) => f.class));
  for (const inst of scene.instances) {
    drawInstance(ctx, inst, scale, cx, cy, flashedClasses.has(inst.class), summary);
  }

  drawAvatar(ctx, cx, cy);

  // sector ray tick marks at the wheel rim help reading indices
  ctx.save();
  ctx.fillStyle = COLORS.text;
  ctx.font = "10px sans-serif";
  for (let s = 0; s < SECTOR_COUNT; s++) {
    const a = sectorRayAngle(s);
    ctx.fillText(
      String(s),
      cx + (wheelR + 8) * Math.cos(a) - 3,
      cy + (wheelR + 8) * Math.sin(a) + 3,
    );
  }
  ctx.restore();

  return summary;
}
