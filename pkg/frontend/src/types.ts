// JSON shapes served by the scan service. The UI treats all of these as
// read-only data; every sector index and ego coordinate is produced on the
// server and only transformed here for drawing.

export interface PoseJson {
  x: number;
  y: number;
  heading: number;
}

/** Ego-frame point: metres forward of the avatar, metres to its left. */
export interface EgoPointJson {
  x_fwd: number;
  y_left: number;
}

export interface FeaturePointsJson {
  closest: EgoPointJson;
  x_min: EgoPointJson;
  x_max: EgoPointJson;
  y_min: EgoPointJson;
  y_max: EgoPointJson;
}

export interface InstanceJson {
  class: string;
  class_id: number;
  score: number;
  range_m: number;
  sector: number;
  occupied_sectors: number[];
  feature_points: FeaturePointsJson;
}

export interface TopViewJson {
  pose: PoseJson;
  headroom: number;
  scanned_sectors: number[];
  instances: InstanceJson[];
}

export interface ObstacleNoteJson {
  class: string;
  range_m: number;
  sector: number;
  occupied_sectors: number[];
}

export interface AvoidAnswerJson {
  free_sectors: number[];
  suggested: number[];
  fallback_unscanned: number[];
  obstacles_in_range: ObstacleNoteJson[];
  narration: string[];
}

export interface FindTargetJson {
  class: string;
  range_m: number;
  sector: number;
  score: number;
}

export interface FindAnswerJson {
  found: boolean;
  class: string;
  target: FindTargetJson | null;
  alerts: ObstacleNoteJson[];
  narration: string[];
}

export interface CollisionJson {
  class: string;
  range: number;
  sector: number;
}

export interface PoseResponseJson {
  topview: TopViewJson;
  cache_hit: boolean;
  seconds: number;
  collisions: CollisionJson[];
}

export interface SessionInfoJson {
  id: string;
  n_points: number;
  n_instances: number;
  timing: Record<string, number>;
}

export interface EventJson {
  seq: number;
  t: number;
  kind: string;
  payload: Record<string, unknown>;
}

export const SECTOR_COUNT = 12;

export const SECTOR_NAMES: readonly string[] = [
  "directly forward",
  "forward-left",
  "left-forward",
  "directly left",
  "left-backward",
  "backward-left",
  "directly backward",
  "backward-right",
  "right-backward",
  "directly right",
  "right-forward",
  "forward-right",
];

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isIntArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((x) => isNum(x));
}

function isEgoPoint(v: unknown): v is EgoPointJson {
  if (typeof v !== "object" || v === null) return false;
  const p = v as Record<string, unknown>;
  return isNum(p.x_fwd) && isNum(p.y_left);
}

function isInstance(v: unknown): v is InstanceJson {
  if (typeof v !== "object" || v === null) return false;
  const i = v as Record<string, unknown>;
  if (typeof i.class !== "string") return false;
  if (!isNum(i.range_m) || !isNum(i.sector)) return false;
  if (!isIntArray(i.occupied_sectors)) return false;
  const fp = i.feature_points as Record<string, unknown> | undefined;
  if (typeof fp !== "object" || fp === null) return false;
  return ["closest", "x_min", "x_max", "y_min", "y_max"].every((k) =>
    isEgoPoint(fp[k]),
  );
}

/**
 * Structural check applied to anything the UI is about to draw as a scene.
 * A payload that fails it is rendered as an error banner instead of a wheel;
 * the guard never repairs or fills in fields.
 */
export function isTopViewJson(v: unknown): v is TopViewJson {
  if (typeof v !== "object" || v === null) return false;
  const t = v as Record<string, unknown>;
  const pose = t.pose as Record<string, unknown> | undefined;
  if (typeof pose !== "object" || pose === null) return false;
  if (!isNum(pose.x) || !isNum(pose.y) || !isNum(pose.heading)) return false;
  if (!isIntArray(t.scanned_sectors)) return false;
  if (!Array.isArray(t.instances)) return false;
  return t.instances.every(isInstance);
}
