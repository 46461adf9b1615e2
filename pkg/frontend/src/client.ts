// Connection glue: one socket, one state store, one input loop. Works
// against the browser WebSocket and against ws in tests; only the
// EventTarget-ish surface both share is used.

import { Outbox, parseServerMessage } from "./protocol.js";
import type { ServerMessage } from "./protocol.js";
import {
  applyServer,
  canStartRecording,
  initialState,
  markClosed,
  markSaveRequested,
} from "./state.js";
import type { ConsoleState } from "./state.js";
import { InputTracker } from "./input.js";
import type { Bindings } from "./input.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (ev: any) => void): void;
}

export interface ClientOptions {
  sensitivity?: number;
  bindings?: Bindings;
}

export class ConsoleClient {
  state: ConsoleState = initialState();
  readonly tracker: InputTracker;
  sensitivity: number;

  private outbox = new Outbox();
  private timer: ReturnType<typeof setInterval> | null = null;
  private listeners: Array<(s: ConsoleState) => void> = [];

  constructor(private socket: SocketLike, opts: ClientOptions = {}) {
    this.sensitivity = opts.sensitivity ?? 1.0;
    this.tracker = new InputTracker(opts.bindings);
    socket.addEventListener("message", (ev: { data: unknown }) =>
      this.onText(String(ev.data)));
    socket.addEventListener("close", () => {
      this.stopLoop();
      this.update(markClosed(this.state));
    });
  }

  onChange(fn: (s: ConsoleState) => void): void {
    this.listeners.push(fn);
  }

  private update(next: ConsoleState): void {
    this.state = next;
    for (const fn of this.listeners) fn(next);
  }

  private onText(text: string): void {
    let msg: ServerMessage;
    try {
      msg = parseServerMessage(text);
    } catch {
      this.update({ ...this.state, errors: [...this.state.errors, "unparseable server frame"] });
      return;
    }
    const hadHello = this.state.hello !== null;
    this.update(applyServer(this.state, msg));
    if (!hadHello && this.state.hello !== null) this.startLoop(this.state.hello.dt);
  }

  private startLoop(dt: number): void {
    this.stopLoop();
    this.timer = setInterval(() => this.pump(), Math.max(10, dt * 1000));
  }

  private stopLoop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** One input beat: ship the current increment, explicit idle included.
      Runs on a timer at the served tick rate; key handlers may call it
      directly so a press is not held back until the next beat. */
  pump(): void {
    const hello = this.state.hello;
    if (hello === null || this.state.connection !== "connected") return;
    const [dx, dz, dth] = this.tracker.increments(hello.limits, this.sensitivity);
    this.socket.send(this.outbox.control(dx, dz, dth));
  }

  startRecording(seed?: number): boolean {
    if (!canStartRecording(this.state)) return false;
    this.socket.send(this.outbox.record("start", seed));
    return true;
  }

  stopRecording(): void {
    this.socket.send(this.outbox.record("stop"));
  }

  save(): void {
    this.update(markSaveRequested(this.state));
    this.socket.send(this.outbox.record("save"));
  }

  discard(): void {
    this.socket.send(this.outbox.record("discard"));
  }

  reset(seed?: number): void {
    this.socket.send(this.outbox.reset(seed));
  }

  close(): void {
    this.stopLoop();
    this.socket.close();
  }
}
