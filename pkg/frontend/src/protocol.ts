// Wire protocol shared with the session server: one JSON object per
// message, delivered over a WebSocket text frame or an NDJSON line.

export const DIRECTIONS = [
  "POS_X", "NEG_X", "POS_Y", "NEG_Y", "UP", "DOWN",
] as const;

export type Direction = (typeof DIRECTIONS)[number];

export interface HelloMsg {
  type: "hello";
  protocol_version: number;
  session_config?: unknown;
}

export interface StateUpdateMsg {
  type: "state_update";
  episode_id: number;
  phase: string;
  image: { w: number; h: number; b64: string };
  grasp: { x: number; y: number; theta: number };
  grasp_success: boolean;
  overlay: { bar: [number, number][]; contacts: [number, number][] };
}

export interface ActionRequestMsg {
  type: "action_request";
  request_id: number;
  directions: Direction[];
  magnitude: number;
}

export interface OutcomeMsg {
  type: "outcome";
  request_id: number;
  withstood: boolean;
  reward: number;
}

export interface ProgressMsg {
  type: "progress";
  batch: number;
  episodes_done: number;
  snatch_count: number;
}

export interface SessionEndMsg {
  type: "session_end";
  summary: Record<string, unknown>;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  detail?: string;
}

export type ServerMsg =
  | HelloMsg
  | StateUpdateMsg
  | ActionRequestMsg
  | OutcomeMsg
  | ProgressMsg
  | SessionEndMsg
  | ErrorMsg;

export interface HumanActionMsg {
  type: "human_action";
  request_id: number;
  direction: Direction;
}

// The client never emits anything beyond these two.
export type ClientMsg = HelloMsg | HumanActionMsg;
