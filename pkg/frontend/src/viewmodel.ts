/** Client-side session view: server-confirmed state only, no prediction. */

import { ServerMessage, StateMessage } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface ViewModel {
  connection: Connection;
  state: StateMessage | null;
  episode: number | null;
  lastSaved: string | null;
  lastError: string | null;
  lastNack: string | null;
}

export function initialViewModel(): ViewModel {
  return {
    connection: "connecting",
    state: null,
    episode: null,
    lastSaved: null,
    lastError: null,
    lastNack: null,
  };
}

export function applyServerMessage(vm: ViewModel, msg: ServerMessage): ViewModel {
  switch (msg.type) {
    case "state":
      return { ...vm, state: msg };
    case "started":
      return { ...vm, episode: msg.episode, lastSaved: null, lastError: null, lastNack: null };
    case "nack":
      return { ...vm, lastNack: `mode ${msg.requested} not allowed (allowed: ${msg.allowed.join(", ")})` };
    case "error":
      return { ...vm, lastError: msg.reason };
    case "saved":
      return { ...vm, lastSaved: msg.path };
    default:
      return vm;
  }
}

export function setConnection(vm: ViewModel, connection: Connection): ViewModel {
  return { ...vm, connection };
}

export const MODE_NAMES = ["auto: return", "manual: reach", "auto: carry", "manual: place"];

export function nextMode(mode: number): number {
  return (mode + 1) % 4;
}

/** The only mode the switch button may request (server masks the rest). */
export function allowedNextMode(vm: ViewModel): number | null {
  if (vm.connection !== "open" || vm.state === null || vm.state.done) return null;
  return nextMode(vm.state.mode);
}

/** Manual steering is possible only in a live manual-mode episode. */
export function inputEnabled(vm: ViewModel): boolean {
  return vm.connection === "open" && vm.state !== null && vm.state.manual && !vm.state.done;
}

export function switchEnabled(vm: ViewModel): boolean {
  return allowedNextMode(vm) !== null;
}

/** Disturbance overlay is meaningful when the executed action differs. */
export function showDisturbance(vm: ViewModel): boolean {
  if (vm.state === null) return false;
  const { intended, executed } = vm.state;
  return intended.some((v, i) => v !== executed[i]);
}
