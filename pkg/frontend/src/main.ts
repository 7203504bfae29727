/** Demonstration console: renders server state, steers with the keyboard,
 * switches modes, and saves episodes, all through one WebSocket. */

import { actionFromKeys, isBoundKey, SWITCH_KEY } from "./input.js";
import { ClientMessage, parseServerMessage, validateClientMessage } from "./protocol.js";
import { PALETTE, render, statusLine } from "./render.js";
import {
  allowedNextMode,
  applyServerMessage,
  initialViewModel,
  inputEnabled,
  MODE_NAMES,
  setConnection,
  switchEnabled,
  ViewModel,
} from "./viewmodel.js";

const TICK_MS = 50; // matches the server tick; at most one action per tick

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function main(): void {
  const canvas = byId<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");
  const status = byId<HTMLDivElement>("status");
  const switchBtn = byId<HTMLButtonElement>("switch");
  const startBtn = byId<HTMLButtonElement>("start");
  const resetBtn = byId<HTMLButtonElement>("reset");
  const saveBtn = byId<HTMLButtonElement>("save");
  const objectsInput = byId<HTMLInputElement>("objects");
  const sigmaInput = byId<HTMLInputElement>("sigma");
  const seedInput = byId<HTMLInputElement>("seed");

  let vm: ViewModel = initialViewModel();
  const held = new Set<string>();

  const url = new URLSearchParams(window.location.search).get("server") ?? "ws://127.0.0.1:8765";
  const ws = new WebSocket(url);

  function send(msg: ClientMessage): void {
    const problem = validateClientMessage(msg);
    if (problem) {
      console.error("refusing to send invalid message:", problem);
      return;
    }
    if (ws.readyState === WebSocket.OPEN) {
      ws.send(JSON.stringify(msg));
    }
  }

  ws.onopen = () => {
    vm = setConnection(vm, "open");
    send({ type: "hello" });
  };
  ws.onclose = () => {
    vm = setConnection(vm, "closed");
    held.clear(); // input lockout on disconnect
  };
  ws.onerror = () => {
    vm = setConnection(vm, "closed");
  };
  ws.onmessage = (event: MessageEvent) => {
    const msg = parseServerMessage(String(event.data));
    if (msg) {
      vm = applyServerMessage(vm, msg);
    }
  };

  startBtn.onclick = () => {
    send({
      type: "start",
      config: { n_objects: Number(objectsInput.value) || 1 },
      sigma: Number(sigmaInput.value) || 0,
      seed: Number(seedInput.value) || 0,
    });
  };
  resetBtn.onclick = () => send({ type: "reset" });
  saveBtn.onclick = () => send({ type: "save" });
  switchBtn.onclick = () => {
    const next = allowedNextMode(vm);
    if (next !== null) send({ type: "switch_mode", mode: next });
  };

  window.addEventListener("keydown", (e) => {
    if (!isBoundKey(e.key)) return;
    e.preventDefault();
    if (e.key === SWITCH_KEY) {
      const next = allowedNextMode(vm);
      if (next !== null) send({ type: "switch_mode", mode: next });
      return;
    }
    if (vm.connection === "open") held.add(e.key);
  });
  window.addEventListener("keyup", (e) => {
    held.delete(e.key);
  });

  // one action message per server tick; zero action when nothing is held
  window.setInterval(() => {
    if (vm.connection === "open" && vm.state !== null && !vm.state.done) {
      send({ type: "action", ...actionFromKeys(held) });
    }
  }, TICK_MS);

  function frame(): void {
    render(ctx!, vm, canvas.width, canvas.height);
    status.textContent = statusLine(vm);
    const next = allowedNextMode(vm);
    switchBtn.disabled = !switchEnabled(vm);
    switchBtn.textContent = next === null ? "switch mode" : `switch to ${next} (${MODE_NAMES[next]})`;
    const steering = inputEnabled(vm);
    canvas.style.opacity = vm.connection === "open" ? "1.0" : "0.4";
    canvas.style.borderColor = steering ? PALETTE.executed : "#444";
    window.requestAnimationFrame(frame);
  }
  window.requestAnimationFrame(frame);
}

window.addEventListener("DOMContentLoaded", main);
