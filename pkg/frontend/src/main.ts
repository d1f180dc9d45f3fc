/** DOM wiring: canvas, condition picker, and the socket client. */

import { ServiceClient, type SocketLike } from "./client.js";
import { InputController } from "./input.js";
import type { FeedbackName, PointingModeName } from "./protocol.js";
import { render, type Ctx2D } from "./render.js";
import {
  applyServerMsg,
  initialState,
  setCondition,
  setConnection,
  type ViewState,
} from "./state.js";

const WIDTH = 640;
const HEIGHT = 480;

export function start(root: Document, serverUrl: string): void {
  const canvas = root.getElementById("scene") as HTMLCanvasElement;
  canvas.width = WIDTH;
  canvas.height = HEIGHT;
  const ctx = canvas.getContext("2d")! as unknown as Ctx2D;

  let state: ViewState = initialState();
  const redraw = () => render(ctx, state, WIDTH, HEIGHT);

  const client = new ServiceClient(
    () => new WebSocket(serverUrl) as unknown as SocketLike,
    {
      onMessage: (msg) => {
        state = applyServerMsg(state, msg);
        redraw();
      },
      onStatus: (status) => {
        state = setConnection(state, status);
        redraw();
      },
    }
  );

  const input = new InputController((msg) => client.send(msg), {
    width: WIDTH,
    height: HEIGHT,
    maxHz: 30,
  });

  canvas.addEventListener("mousemove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    input.move(ev.clientX - rect.left, ev.clientY - rect.top);
  });
  canvas.addEventListener("mousedown", () => input.press());
  root.addEventListener("mouseup", () => input.release());
  root.addEventListener("keydown", (ev) => input.key(ev.key, true));
  root.addEventListener("keyup", (ev) => input.key(ev.key, false));

  const modeSel = root.getElementById("mode") as HTMLSelectElement;
  const feedbackSel = root.getElementById("feedback") as HTMLSelectElement;
  const apply = root.getElementById("apply-condition") as HTMLButtonElement;
  apply.addEventListener("click", () => {
    const mode = modeSel.value as PointingModeName;
    const feedback = feedbackSel.value as FeedbackName;
    client.send({ type: "set_condition", mode, feedback });
    state = setCondition(state, mode, feedback);
    redraw();
  });

  const startBlock = root.getElementById("start-block") as HTMLButtonElement;
  startBlock.addEventListener("click", () => {
    client.send({ type: "start_trial_block" });
  });

  client.connect();
  redraw();
}
