/**
 * Input loop: mouse movement becomes Aim, press/release (or the space bar,
 * as a keyboard pinch alternative) becomes PinchDown/PinchUp. Aim messages
 * are rate-limited to at most `maxHz` so the client never exceeds the
 * engine frame rate; pinch transitions are sent immediately and exactly
 * once per edge. Positions outside the canvas send nothing.
 */

import type { ClientMsg } from "./protocol.js";

export interface InputOptions {
  maxHz?: number;
  width: number;
  height: number;
  /** Clock in milliseconds; injectable for tests. */
  now?: () => number;
}

export class InputController {
  private readonly send: (msg: ClientMsg) => void;
  private readonly minIntervalMs: number;
  private readonly width: number;
  private readonly height: number;
  private readonly now: () => number;
  private lastAimAt = -Infinity;
  private pinched = false;

  constructor(send: (msg: ClientMsg) => void, opts: InputOptions) {
    this.send = send;
    this.minIntervalMs = 1000 / (opts.maxHz ?? 30);
    this.width = opts.width;
    this.height = opts.height;
    this.now = opts.now ?? (() => Date.now());
  }

  /** Pointer moved to canvas-local pixel (u, v). */
  move(u: number, v: number): void {
    if (u < 0 || v < 0 || u >= this.width || v >= this.height) return;
    const t = this.now();
    if (t - this.lastAimAt < this.minIntervalMs) return;
    this.lastAimAt = t;
    this.send({ type: "aim", u, v });
  }

  press(): void {
    if (this.pinched) return;
    this.pinched = true;
    this.send({ type: "pinch_down" });
  }

  release(): void {
    if (!this.pinched) return;
    this.pinched = false;
    this.send({ type: "pinch_up" });
  }

  /** Keyboard pinch alternative: space acts like press/release. */
  key(key: string, down: boolean): void {
    if (key !== " " && key !== "Space") return;
    if (down) this.press();
    else this.release();
  }
}
