/** Top-down canvas rendering of the workspace.
 *
 * Workspace coordinates: x in [-30, 30] cm (left/right), y in [-20, 20] cm.
 * Screen y is flipped so +y points up.  Object radius and gripper glyphs are
 * purely cosmetic; everything drawn comes from the last server state.
 */

import { MODE_NAMES, ViewModel, showDisturbance } from "./viewmodel.js";

const WORK_X = 30;
const WORK_Y = 20;

export interface Palette {
  background: string;
  whiteArea: string;
  blueArea: string;
  object: string;
  objectPlaced: string;
  objectAttached: string;
  gripper: string;
  intended: string;
  executed: string;
  text: string;
}

export const PALETTE: Palette = {
  background: "#1c1f26",
  whiteArea: "#f5f5f0",
  blueArea: "#3d6fb4",
  object: "#e0a63c",
  objectPlaced: "#69b978",
  objectAttached: "#e05c5c",
  gripper: "#d8dee9",
  intended: "#8fbcbb",
  executed: "#bf616a",
  text: "#d8dee9",
};

export function toScreen(x: number, y: number, width: number, height: number): [number, number] {
  const sx = ((x + WORK_X) / (2 * WORK_X)) * width;
  const sy = height - ((y + WORK_Y) / (2 * WORK_Y)) * height;
  return [sx, sy];
}

export function render(ctx: CanvasRenderingContext2D, vm: ViewModel, width: number, height: number): void {
  ctx.fillStyle = PALETTE.background;
  ctx.fillRect(0, 0, width, height);

  // pick-up and drop-off areas
  const areaWidth = (10 / (2 * WORK_X)) * width;
  ctx.fillStyle = PALETTE.whiteArea;
  ctx.globalAlpha = 0.25;
  ctx.fillRect(0, 0, areaWidth, height);
  ctx.fillStyle = PALETTE.blueArea;
  ctx.fillRect(width - areaWidth, 0, areaWidth, height);
  ctx.globalAlpha = 1.0;

  const state = vm.state;
  if (!state) {
    drawBanner(ctx, vm.connection === "open" ? "waiting for episode (press Start)" : "connecting...", width);
    return;
  }

  for (const o of state.objects) {
    const [ox, oy] = toScreen(o.x, o.y, width, height);
    ctx.beginPath();
    ctx.fillStyle = o.placed ? PALETTE.objectPlaced : o.attached ? PALETTE.objectAttached : PALETTE.object;
    ctx.arc(ox, oy, 9, 0, 2 * Math.PI);
    ctx.fill();
  }

  // gripper: circle whose jaw gap tracks the joint angle (1 = open)
  const [gx, gy] = toScreen(state.gripper[0], state.gripper[1], width, height);
  const theta = state.gripper[3];
  ctx.strokeStyle = PALETTE.gripper;
  ctx.lineWidth = 3;
  const gap = (Math.PI / 2.2) * theta;
  ctx.beginPath();
  ctx.arc(gx, gy, 13, gap, Math.PI - gap);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(gx, gy, 13, Math.PI + gap, 2 * Math.PI - gap);
  ctx.stroke();
  ctx.fillStyle = PALETTE.text;
  ctx.font = "11px monospace";
  ctx.fillText(`z=${state.gripper[2].toFixed(1)}`, gx + 16, gy - 10);

  if (showDisturbance(vm)) {
    drawArrow(ctx, gx, gy, state.intended, PALETTE.intended, width, height);
    drawArrow(ctx, gx, gy, state.executed, PALETTE.executed, width, height);
  }

  const mode = MODE_NAMES[state.mode] ?? `mode ${state.mode}`;
  drawBanner(
    ctx,
    state.success
      ? `SUCCESS - all ${state.moved_count} objects placed`
      : `mode ${state.mode} (${mode})  moved ${state.moved_count}  t=${state.t}`,
    width,
  );

  ctx.fillStyle = PALETTE.text;
  ctx.font = "12px monospace";
  ctx.fillText(`sigma = [${state.sigma.map((v) => v.toFixed(3)).join(", ")}]`, 10, height - 10);
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  gx: number,
  gy: number,
  action: [number, number, number, number],
  color: string,
  width: number,
  height: number,
): void {
  const scale = 6; // px per cm of commanded motion
  const dx = (action[0] / (2 * WORK_X)) * width * 0.9 * (scale / 6);
  const dy = -(action[1] / (2 * WORK_Y)) * height * 0.9 * (scale / 6);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(gx, gy);
  ctx.lineTo(gx + dx * 4, gy + dy * 4);
  ctx.stroke();
}

function drawBanner(ctx: CanvasRenderingContext2D, text: string, width: number): void {
  ctx.fillStyle = "rgba(0, 0, 0, 0.55)";
  ctx.fillRect(0, 0, width, 26);
  ctx.fillStyle = PALETTE.text;
  ctx.font = "13px monospace";
  ctx.fillText(text, 10, 18);
}

export function statusLine(vm: ViewModel): string {
  if (vm.connection !== "open") return `connection: ${vm.connection}`;
  if (vm.lastError) return `error: ${vm.lastError}`;
  if (vm.lastNack) return vm.lastNack;
  if (vm.lastSaved) return `saved: ${vm.lastSaved}`;
  return "connected";
}
