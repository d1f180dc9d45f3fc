/**
 * View state: a pure reducer over server messages. The engine on the server
 * is the single source of truth — this module only accumulates what was
 * received (latest-wins for frames, lossless for everything else) so the
 * renderer and the trial tally are replayable from a session transcript.
 */

import type {
  BlockCompleteMsg,
  FeedbackName,
  FrameMsg,
  InstructionMsg,
  PointingModeName,
  ServerMsg,
  TrialResultMsg,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface ViewState {
  connection: ConnectionStatus;
  /** Latest frame view; stale frames are dropped, never re-ordered. */
  frame: FrameMsg | null;
  instruction: InstructionMsg | null;
  results: TrialResultMsg[];
  blockComplete: BlockCompleteMsg | null;
  condition: { mode: PointingModeName; feedback: FeedbackName };
  warnings: string[];
}

export function initialState(): ViewState {
  return {
    connection: "connecting",
    frame: null,
    instruction: null,
    results: [],
    blockComplete: null,
    condition: { mode: "finger", feedback: "on" },
    warnings: [],
  };
}

export function applyServerMsg(state: ViewState, msg: ServerMsg): ViewState {
  switch (msg.type) {
    case "frame":
      if (state.frame !== null && msg.t < state.frame.t) return state;
      return { ...state, frame: msg };
    case "instruction":
      return { ...state, instruction: msg };
    case "trial_result":
      return { ...state, results: [...state.results, msg] };
    case "block_complete":
      return { ...state, blockComplete: msg, instruction: null };
    case "warning":
      return { ...state, warnings: [...state.warnings, msg.message] };
    case "event":
      return state; // events drive logs, not the rendered view
  }
}

export function setConnection(state: ViewState, connection: ConnectionStatus): ViewState {
  return { ...state, connection };
}

export function setCondition(
  state: ViewState,
  mode: PointingModeName,
  feedback: FeedbackName
): ViewState {
  return { ...state, condition: { mode, feedback } };
}

/** Trial tally shown in the UI; must match the server's result stream. */
export function tally(state: ViewState): { done: number; correct: number } {
  return {
    done: state.results.length,
    correct: state.results.filter((r) => r.correct).length,
  };
}
