// Canvas-space transforms for the sector wheel. The avatar sits at the
// canvas centre facing up; ego coordinates are metres forward / metres left,
// so screen x = centre - left and screen y = centre - forward. Bearings grow
// counter-clockwise from forward, which on a y-down canvas means the angle
// passed to arc() is (-90 - bearing) degrees.

import { SECTOR_COUNT } from "./types.js";
import type { EgoPointJson } from "./types.js";

export const SECTOR_SPAN_DEG = 360 / SECTOR_COUNT;
export const SECTOR_HALF_DEG = SECTOR_SPAN_DEG / 2;

const toRad = (deg: number): number => (deg * Math.PI) / 180;

export interface WedgeAngles {
  start: number;
  end: number;
}

/** Canvas arc() angles covering one sector's 30 degree wedge. */
export function sectorWedgeAngles(sector: number): WedgeAngles {
  const centerDeg = sector * SECTOR_SPAN_DEG;
  return {
    start: toRad(-90 - (centerDeg + SECTOR_HALF_DEG)),
    end: toRad(-90 - (centerDeg - SECTOR_HALF_DEG)),
  };
}

/** Canvas angle of the ray through a sector's centre. */
export function sectorRayAngle(sector: number): number {
  return toRad(-90 - sector * SECTOR_SPAN_DEG);
}

export interface CanvasPoint {
  x: number;
  y: number;
}

export function egoToCanvas(
  p: EgoPointJson,
  scale: number,
  cx: number,
  cy: number,
): CanvasPoint {
  return { x: cx - p.y_left * scale, y: cy - p.x_fwd * scale };
}

/** Point at a given range along a sector's centre ray, in canvas space. */
export function rayPoint(
  sector: number,
  rangeM: number,
  scale: number,
  cx: number,
  cy: number,
): CanvasPoint {
  const a = sectorRayAngle(sector);
  return { x: cx + rangeM * scale * Math.cos(a), y: cy + rangeM * scale * Math.sin(a) };
}
