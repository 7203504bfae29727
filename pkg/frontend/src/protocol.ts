/** Message types shared with the teleop server, plus structural validators.
 *
 * The server is authoritative; these guards only reject messages that are
 * structurally wrong (semantic limits like slot capacity are the server's
 * call and come back as error/nack).
 */

export interface ObjectView {
  x: number;
  y: number;
  z: number;
  attached: boolean;
  placed: boolean;
}

export interface StateMessage {
  type: "state";
  tick: number;
  t: number;
  gripper: [number, number, number, number];
  objects: ObjectView[];
  mode: number;
  manual: boolean;
  intended: [number, number, number, number];
  executed: [number, number, number, number];
  moved_count: number;
  sigma: [number, number, number, number];
  done: boolean;
  success: boolean;
}

export interface WelcomeMessage {
  type: "welcome";
  version: number;
  phase: string;
  accepts: string[];
}

export type ServerMessage =
  | StateMessage
  | WelcomeMessage
  | { type: "started"; episode: number; seed: number }
  | { type: "ack"; mode: number }
  | { type: "nack"; requested: number; allowed: number[] }
  | { type: "saved"; path: string; steps: number }
  | { type: "error"; reason: string };

export interface ActionCommand {
  dx: number;
  dy: number;
  dz: number;
  dtheta: number;
}

export type ClientMessage =
  | { type: "hello" }
  | { type: "start"; config?: Record<string, unknown>; sigma?: number | number[]; seed?: number }
  | ({ type: "action" } & Partial<ActionCommand>)
  | { type: "switch_mode"; mode?: number }
  | { type: "reset" }
  | { type: "save"; path?: string };

export const SERVER_MESSAGE_TYPES = ["welcome", "started", "state", "ack", "nack", "error", "saved"] as const;

const CLIENT_MESSAGE_TYPES = ["hello", "start", "action", "switch_mode", "reset", "save"] as const;

function finiteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Structural check for anything we are about to send. */
export function validateClientMessage(msg: unknown): string | null {
  if (!isRecord(msg) || typeof msg.type !== "string") {
    return "message must be an object with a 'type' field";
  }
  if (!(CLIENT_MESSAGE_TYPES as readonly string[]).includes(msg.type)) {
    return `unknown message type '${msg.type}'`;
  }
  if (msg.type === "action") {
    for (const key of ["dx", "dy", "dz", "dtheta"]) {
      if (key in msg && !finiteNumber(msg[key])) {
        return `action.${key} must be a finite number`;
      }
    }
  }
  if (msg.type === "switch_mode" && "mode" in msg && !Number.isInteger(msg.mode)) {
    return "switch_mode.mode must be an integer";
  }
  if (msg.type === "start") {
    if ("config" in msg && msg.config !== undefined && !isRecord(msg.config)) {
      return "start.config must be an object";
    }
    if ("sigma" in msg && msg.sigma !== undefined) {
      const s = msg.sigma;
      const ok = finiteNumber(s) || (Array.isArray(s) && s.length === 4 && s.every(finiteNumber));
      if (!ok) return "start.sigma must be a number or 4 numbers";
    }
    if ("seed" in msg && msg.seed !== undefined && !Number.isInteger(msg.seed)) {
      return "start.seed must be an integer";
    }
  }
  return null;
}

function vec4(v: unknown): v is [number, number, number, number] {
  return Array.isArray(v) && v.length === 4 && v.every(finiteNumber);
}

export function isStateMessage(msg: unknown): msg is StateMessage {
  if (!isRecord(msg) || msg.type !== "state") return false;
  if (!finiteNumber(msg.tick) || !finiteNumber(msg.t) || !finiteNumber(msg.moved_count)) return false;
  if (!vec4(msg.gripper) || !vec4(msg.intended) || !vec4(msg.executed) || !vec4(msg.sigma)) return false;
  if (!Number.isInteger(msg.mode) || typeof msg.manual !== "boolean") return false;
  if (typeof msg.done !== "boolean" || typeof msg.success !== "boolean") return false;
  if (!Array.isArray(msg.objects)) return false;
  return msg.objects.every(
    (o) =>
      isRecord(o) &&
      finiteNumber(o.x) &&
      finiteNumber(o.y) &&
      finiteNumber(o.z) &&
      typeof o.attached === "boolean" &&
      typeof o.placed === "boolean",
  );
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(obj) || typeof obj.type !== "string") return null;
  if (!(SERVER_MESSAGE_TYPES as readonly string[]).includes(obj.type)) return null;
  if (obj.type === "state" && !isStateMessage(obj)) return null;
  return obj as ServerMessage;
}
