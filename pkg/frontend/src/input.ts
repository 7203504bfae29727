/** Keyboard mapping: held keys become one action command per server tick. */

import { ActionCommand } from "./protocol.js";

// Per-step limits; a held key commands the full step in that direction.
export const CLAMP = { xy: 5, z: 5, theta: 1 };

export const KEY_BINDINGS: Record<string, Partial<ActionCommand>> = {
  ArrowRight: { dx: CLAMP.xy },
  ArrowLeft: { dx: -CLAMP.xy },
  ArrowUp: { dy: CLAMP.xy },
  ArrowDown: { dy: -CLAMP.xy },
  w: { dz: CLAMP.z },
  s: { dz: -CLAMP.z },
  q: { dtheta: CLAMP.theta }, // open
  e: { dtheta: -CLAMP.theta }, // close
};

export const SWITCH_KEY = " ";

export function actionFromKeys(held: ReadonlySet<string>): ActionCommand {
  const cmd: ActionCommand = { dx: 0, dy: 0, dz: 0, dtheta: 0 };
  for (const key of held) {
    const delta = KEY_BINDINGS[key];
    if (!delta) continue;
    cmd.dx += delta.dx ?? 0;
    cmd.dy += delta.dy ?? 0;
    cmd.dz += delta.dz ?? 0;
    cmd.dtheta += delta.dtheta ?? 0;
  }
  cmd.dx = clamp(cmd.dx, CLAMP.xy);
  cmd.dy = clamp(cmd.dy, CLAMP.xy);
  cmd.dz = clamp(cmd.dz, CLAMP.z);
  cmd.dtheta = clamp(cmd.dtheta, CLAMP.theta);
  return cmd;
}

function clamp(v: number, limit: number): number {
  return Math.min(Math.max(v, -limit), limit);
}

export function isBoundKey(key: string): boolean {
  return key in KEY_BINDINGS || key === SWITCH_KEY;
}
