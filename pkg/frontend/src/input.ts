// Keyboard drive model. Each tick applies the active keys to the pose the
// server last acknowledged; the result is posted and the acknowledgement
// becomes the new mirror, so the avatar can never drift from the service's
// record of it.

import type { PoseJson } from "./types.js";

export const STEP_M = 0.1;
export const TURN_RAD = (5 * Math.PI) / 180;

export interface KeyState {
  forward: boolean;
  back: boolean;
  left: boolean;
  right: boolean;
}

export function emptyKeys(): KeyState {
  return { forward: false, back: false, left: false, right: false };
}

/** Map a KeyboardEvent.code to the drive action it controls, if any. */
export function keyFor(code: string): keyof KeyState | null {
  switch (code) {
    case "KeyW":
    case "ArrowUp":
      return "forward";
    case "KeyS":
    case "ArrowDown":
      return "back";
    case "KeyA":
    case "ArrowLeft":
      return "left";
    case "KeyD":
    case "ArrowRight":
      return "right";
    default:
      return null;
  }
}

export function anyActive(keys: KeyState): boolean {
  return keys.forward || keys.back || keys.left || keys.right;
}

/**
 * Advance a pose by one tick: rotation keys turn 5 degrees, movement keys
 * step 0.1 m along the (already turned) heading. Left is the positive
 * rotation direction, matching the service's counter-clockwise headings.
 */
export function tick(pose: PoseJson, keys: KeyState): PoseJson {
  let heading = pose.heading;
  if (keys.left) heading += TURN_RAD;
  if (keys.right) heading -= TURN_RAD;
  let step = 0;
  if (keys.forward) step += STEP_M;
  if (keys.back) step -= STEP_M;
  return {
    x: pose.x + step * Math.cos(heading),
    y: pose.y + step * Math.sin(heading),
    heading,
  };
}
