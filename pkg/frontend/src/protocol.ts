// Wire protocol mirror of the bridge: JSON text frames, schema version 1.
// Server messages carry one dense seq counter across all types; client
// messages carry their own strictly increasing counter.

export const PROTOCOL_VERSION = 1;

export interface FilterLimits {
  f_threshold: number;
  time_limit: number;
  peak_limit: number;
  log_impulse_limit: number;
  keep_fraction: number;
  impulse_domain: string;
}

export interface StepLimits {
  max_step_xy: number;
  max_step_theta: number;
}

export interface HelloMsg {
  type: "hello";
  seq: number;
  protocol: number;
  session: string;
  seed: number;
  dt: number;
  filter: FilterLimits;
  limits: StepLimits;
  time_limit: number;
}

export interface Forces {
  fx: number;
  fy: number;
  fz: number;
  f1: number;
  f2: number;
  fx_ee: number;
  fy_ee: number;
  fz_ee: number;
}

export interface StateMsg {
  type: "state";
  seq: number;
  tick: number;
  t: number;
  pose: [number, number, number];
  forces: Forces;
  frame: string; // base64 PNG
  side: string;  // base64 PNG
  outcome: { status: string; reason: string };
  recording: boolean;
}

export interface VerdictMsg {
  type: "verdict";
  seq: number;
  mode: "safety" | "training";
  accept: boolean;
  reasons: string[];
}

export interface SavedMsg {
  type: "saved";
  seq: number;
  path: string;
}

export interface ErrorMsg {
  type: "error";
  seq: number;
  message: string;
}

export type ServerMessage = HelloMsg | StateMsg | VerdictMsg | SavedMsg | ErrorMsg;

export class ProtocolError extends Error {}

const SERVER_TYPES = new Set(["hello", "state", "verdict", "saved", "error"]);

function need(cond: boolean, what: string): void {
  if (!cond) throw new ProtocolError(`malformed server message: ${what}`);
}

export function parseServerMessage(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("not JSON");
  }
  need(typeof raw === "object" && raw !== null && !Array.isArray(raw), "not an object");
  const m = raw as Record<string, unknown>;
  need(typeof m.type === "string" && SERVER_TYPES.has(m.type), `unknown type ${String(m.type)}`);
  need(typeof m.seq === "number" && Number.isInteger(m.seq) && m.seq >= 0, "bad seq");
  switch (m.type) {
    case "hello":
      need(typeof m.dt === "number" && m.dt > 0, "bad dt");
      need(typeof m.filter === "object" && m.filter !== null, "missing filter");
      need(typeof m.limits === "object" && m.limits !== null, "missing limits");
      need(m.protocol === PROTOCOL_VERSION, `protocol ${String(m.protocol)}`);
      break;
    case "state":
      need(Array.isArray(m.pose) && m.pose.length === 3, "bad pose");
      need(typeof m.forces === "object" && m.forces !== null, "missing forces");
      need(typeof m.recording === "boolean", "missing recording");
      break;
    case "verdict":
      need(m.mode === "safety" || m.mode === "training", "bad mode");
      need(typeof m.accept === "boolean", "bad accept");
      need(Array.isArray(m.reasons), "bad reasons");
      break;
    case "saved":
      need(typeof m.path === "string", "bad path");
      break;
    case "error":
      need(typeof m.message === "string", "bad message");
      break;
  }
  return m as unknown as ServerMessage;
}

export type RecordCmd = "start" | "stop" | "save" | "discard";

/** Client-side message factory owning the outbound sequence counter. */
export class Outbox {
  private seq = 0;

  control(dx: number, dz: number, dtheta: number): string {
    return JSON.stringify({ type: "control", seq: this.seq++, dx, dz, dtheta });
  }

  record(cmd: RecordCmd, seed?: number): string {
    const msg: Record<string, unknown> = { type: "record", seq: this.seq++, cmd };
    if (seed !== undefined) msg.seed = seed;
    return JSON.stringify(msg);
  }

  reset(seed?: number): string {
    const msg: Record<string, unknown> = { type: "reset", seq: this.seq++ };
    if (seed !== undefined) msg.seed = seed;
    return JSON.stringify(msg);
  }
}
