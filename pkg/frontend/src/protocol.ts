/**
 * Wire types for the selection service socket. Field names are normative;
 * the UI renders only what the server sends and computes no selection
 * state of its own.
 */

export interface ObjectView {
  id: number;
  label: string;
  /** Closed polygon of [u, v] pixel coordinates. */
  outline: [number, number][];
}

export interface FrameMsg {
  type: "frame";
  t: number;
  hands_present: boolean;
  /** Present only in feedback-ON conditions. */
  objects?: ObjectView[];
  /** Per hand, 21 landmark [u, v] pixel positions. Feedback-ON only. */
  hands?: [number, number][][];
  /** Highlighted object id, or null. Feedback-ON only. */
  preselected?: number | null;
}

export interface EventMsg {
  type: "event";
  t: number;
  event: "preselect" | "select" | "hands_lost" | "hands_found" | "timeout";
  object: number | null;
}

export interface InstructionMsg {
  type: "instruction";
  target: number;
  label: string;
}

export interface TrialResultMsg {
  type: "trial_result";
  target: number;
  selected: number | null;
  correct: boolean;
}

export interface BlockCompleteMsg {
  type: "block_complete";
  trials: number;
  csv: string | null;
}

export interface WarningMsg {
  type: "warning";
  message: string;
}

export type ServerMsg =
  | FrameMsg
  | EventMsg
  | InstructionMsg
  | TrialResultMsg
  | BlockCompleteMsg
  | WarningMsg;

export type PointingModeName = "finger" | "wrist";
export type FeedbackName = "on" | "off";

export type ClientMsg =
  | { type: "aim"; u: number; v: number }
  | { type: "pinch_down" }
  | { type: "pinch_up" }
  | { type: "set_condition"; mode: PointingModeName; feedback: FeedbackName }
  | { type: "start_trial_block"; selections_per_object?: number };

export function parseServerMsg(raw: string): ServerMsg | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const t = (data as { type?: unknown }).type;
  if (
    t === "frame" ||
    t === "event" ||
    t === "instruction" ||
    t === "trial_result" ||
    t === "block_complete" ||
    t === "warning"
  ) {
    return data as ServerMsg;
  }
  return null;
}
