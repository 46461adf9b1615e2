// Console state as a pure reducer over server messages plus a few
// client-side actions. Rendering reads this and nothing else.

import type { HelloMsg, ServerMessage, StateMsg, VerdictMsg } from "./protocol.js";

export type Connection = "connecting" | "connected" | "closed";

export interface ConsoleState {
  connection: Connection;
  hello: HelloMsg | null;
  frame: StateMsg | null;     // newest frame only, stale ones are dropped
  lastServerSeq: number;
  droppedFrames: number;
  savedPath: string | null;
  verdicts: VerdictMsg[];     // verdicts of the last save, arrival order
  awaitingVerdict: boolean;   // save sent, no verdict back yet
  errors: string[];
}

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    hello: null,
    frame: null,
    lastServerSeq: -1,
    droppedFrames: 0,
    savedPath: null,
    verdicts: [],
    awaitingVerdict: false,
    errors: [],
  };
}

export function applyServer(s: ConsoleState, msg: ServerMessage): ConsoleState {
  switch (msg.type) {
    case "hello":
      return { ...s, connection: "connected", hello: msg, lastServerSeq: msg.seq };
    case "state": {
      if (msg.seq <= s.lastServerSeq && s.frame !== null && msg.seq <= s.frame.seq) {
        // out of order: keep what is on screen
        return { ...s, droppedFrames: s.droppedFrames + 1 };
      }
      return {
        ...s,
        frame: msg,
        lastServerSeq: Math.max(s.lastServerSeq, msg.seq),
      };
    }
    case "verdict":
      return {
        ...s,
        verdicts: [...s.verdicts, msg],
        awaitingVerdict: false,
        lastServerSeq: Math.max(s.lastServerSeq, msg.seq),
      };
    case "saved":
      return { ...s, savedPath: msg.path, lastServerSeq: Math.max(s.lastServerSeq, msg.seq) };
    case "error":
      return {
        ...s,
        errors: [...s.errors, msg.message],
        // a failed save never produces a verdict, release the gate
        awaitingVerdict: false,
        lastServerSeq: Math.max(s.lastServerSeq, msg.seq),
      };
  }
}

export function markSaveRequested(s: ConsoleState): ConsoleState {
  return { ...s, awaitingVerdict: true, savedPath: null, verdicts: [] };
}

export function markClosed(s: ConsoleState): ConsoleState {
  return { ...s, connection: "closed" };
}

export function isRecording(s: ConsoleState): boolean {
  return s.frame !== null && s.frame.recording;
}

/** A new recording is allowed only once the previous save got its verdict. */
export function canStartRecording(s: ConsoleState): boolean {
  return s.connection === "connected" && !isRecording(s) && !s.awaitingVerdict;
}
