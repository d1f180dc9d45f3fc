/**
 * Canvas 2D rendering of the received view state. Draws exactly what the
 * server sent: object outlines, the preselected object filled green, the
 * hand skeleton, a red border when hands are not in the image, and the
 * current instruction. Feedback-OFF frames carry no overlay fields and so
 * render as the plain scene plus instruction. No selection logic here.
 */

import type { FrameMsg } from "./protocol.js";
import { tally, type ViewState } from "./state.js";

/** Subset of CanvasRenderingContext2D the renderer needs (mockable). */
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillText(text: string, x: number, y: number): void;
}

export const HIGHLIGHT_FILL = "#2e8b57"; // green highlight for the preselection
export const OUTLINE_STROKE = "#dddddd";
export const HANDS_LOST_STROKE = "#cc2222"; // red frame: hands not in the image
export const SKELETON_STROKE = "#4488ff";

/** Bone pairs of the 21-landmark hand model (wrist = 0, 4 per finger). */
export const HAND_EDGES: [number, number][] = [
  [0, 1], [1, 2], [2, 3], [3, 4],
  [0, 5], [5, 6], [6, 7], [7, 8],
  [9, 10], [10, 11], [11, 12],
  [13, 14], [14, 15], [15, 16],
  [0, 17], [17, 18], [18, 19], [19, 20],
  [5, 9], [9, 13], [13, 17],
];

function tracePolygon(ctx: Ctx2D, pts: [number, number][]): void {
  ctx.beginPath();
  pts.forEach(([u, v], i) => (i === 0 ? ctx.moveTo(u, v) : ctx.lineTo(u, v)));
  ctx.closePath();
}

function drawFrame(ctx: Ctx2D, frame: FrameMsg, width: number, height: number): void {
  for (const obj of frame.objects ?? []) {
    if (obj.outline.length === 0) continue;
    tracePolygon(ctx, obj.outline);
    if (obj.id === frame.preselected) {
      ctx.fillStyle = HIGHLIGHT_FILL;
      ctx.globalAlpha = 0.6;
      ctx.fill();
      ctx.globalAlpha = 1.0;
    }
    ctx.strokeStyle = OUTLINE_STROKE;
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.fillStyle = OUTLINE_STROKE;
    ctx.font = "12px sans-serif";
    ctx.fillText(obj.label, obj.outline[0][0], obj.outline[0][1] - 4);
  }

  for (const landmarks of frame.hands ?? []) {
    ctx.strokeStyle = SKELETON_STROKE;
    ctx.lineWidth = 2;
    for (const [a, b] of HAND_EDGES) {
      if (a >= landmarks.length || b >= landmarks.length) continue;
      ctx.beginPath();
      ctx.moveTo(landmarks[a][0], landmarks[a][1]);
      ctx.lineTo(landmarks[b][0], landmarks[b][1]);
      ctx.stroke();
    }
    ctx.fillStyle = SKELETON_STROKE;
    for (const [u, v] of landmarks) {
      ctx.beginPath();
      ctx.arc(u, v, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  if (!frame.hands_present) {
    ctx.strokeStyle = HANDS_LOST_STROKE;
    ctx.lineWidth = 8;
    ctx.strokeRect(4, 4, width - 8, height - 8);
  }
}

export function render(ctx: Ctx2D, view: ViewState, width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#111111";
  ctx.fillRect(0, 0, width, height);

  if (view.frame !== null) {
    drawFrame(ctx, view.frame, width, height);
  }

  ctx.fillStyle = "#ffffff";
  ctx.font = "16px sans-serif";
  if (view.blockComplete !== null) {
    ctx.fillText(`Block complete: ${view.blockComplete.trials} trials`, 12, 24);
  } else if (view.instruction !== null) {
    ctx.fillText(`Select object ${view.instruction.label}`, 12, 24);
  }

  const { done, correct } = tally(view);
  ctx.font = "12px sans-serif";
  ctx.fillText(
    `${view.condition.mode} / feedback ${view.condition.feedback} — trials ${done} (${correct} correct)`,
    12,
    height - 10
  );

  if (view.connection !== "open") {
    ctx.fillStyle = HANDS_LOST_STROKE;
    ctx.fillRect(0, height / 2 - 16, width, 32);
    ctx.fillStyle = "#ffffff";
    ctx.font = "14px sans-serif";
    ctx.fillText(
      view.connection === "closed" ? "disconnected — reconnecting…" : "connecting…",
      12,
      height / 2 + 5
    );
  }
}
