// Integration against a real bridge: these tests spawn the Python server
// (`tubepilot teleop-serve`) on an ephemeral port and talk to it over a
// genuine websocket, exactly like the browser build does.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { performance } from "node:perf_hooks";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { ConsoleClient } from "../src/client.js";
import { Outbox, parseServerMessage } from "../src/protocol.js";
import type { ServerMessage } from "../src/protocol.js";
import { applyServer, initialState } from "../src/state.js";
import type { ConsoleState } from "../src/state.js";
import { bandsFrom, classify } from "../src/bars.js";

let proc: ChildProcess;
let url = "";
let outDir = "";

beforeAll(async () => {
  outDir = mkdtempSync(join(tmpdir(), "console-live-"));
  proc = spawn("python3",
    ["-m", "tubepilot.cli", "teleop-serve", "--bind", "127.0.0.1:0",
     "--out", outDir, "--seed", "0"],
    { stdio: ["ignore", "pipe", "pipe"] });
  url = await new Promise<string>((resolve, reject) => {
    let buf = "";
    proc.stdout!.on("data", (chunk: Buffer) => {
      buf += chunk.toString();
      const m = buf.match(/serving on (ws:\/\/[^\s]+)/);
      if (m) resolve(m[1]);
    });
    proc.stderr!.on("data", (chunk: Buffer) => {
      buf += chunk.toString();
    });
    proc.on("exit", () => reject(new Error(`bridge died:\n${buf}`)));
    setTimeout(() => reject(new Error(`bridge never bound:\n${buf}`)), 25_000);
  });
});

afterAll(() => {
  proc?.kill();
});

function connect(): Promise<WebSocket> {
  const ws = new WebSocket(url);
  return new Promise((resolve, reject) => {
    ws.addEventListener("open", () => resolve(ws));
    ws.addEventListener("error", (ev: any) => reject(ev.error ?? new Error("ws error")));
  });
}

function waitFor(client: ConsoleClient, pred: (s: ConsoleState) => boolean,
                 ms = 10_000): Promise<ConsoleState> {
  return new Promise((resolve, reject) => {
    if (pred(client.state)) return resolve(client.state);
    const timer = setTimeout(
      () => reject(new Error("timed out waiting for console state")), ms);
    client.onChange((s) => {
      if (pred(s)) {
        clearTimeout(timer);
        resolve(s);
      }
    });
  });
}

describe("live bridge", () => {
  it("reflects a keypress in a pose delta within 150 ms", async () => {
    const client = new ConsoleClient(await connect());
    const ready = await waitFor(client, (s) => s.frame !== null);
    const x0 = ready.frame!.pose[0];

    const t0 = performance.now();
    client.tracker.press("ArrowRight");
    client.pump();
    await waitFor(client, (s) => s.frame !== null && s.frame.pose[0] > x0 + 1e-9);
    const elapsed = performance.now() - t0;
    client.tracker.release("ArrowRight");
    client.close();
    expect(elapsed).toBeLessThan(150);
  });

  it("serves the force-band thresholds it filters with", async () => {
    const client = new ConsoleClient(await connect());
    const s = await waitFor(client, (st) => st.hello !== null);
    const bands = bandsFrom(s.hello!.filter);
    client.close();
    expect(bands.warn).toBeCloseTo(3.5, 9);
    expect(bands.danger).toBeCloseTo(5.0, 9);
    expect(classify(3.6, bands)).toBe("warning");
    expect(classify(5.0, bands)).toBe("danger");
  });

  it("record, stop, save shows the verdict before the next recording", async () => {
    const client = new ConsoleClient(await connect());
    await waitFor(client, (s) => s.frame !== null);

    expect(client.startRecording(3)).toBe(true);
    await waitFor(client, (s) => s.frame !== null && s.frame.recording
      && s.frame.tick >= 3);
    client.stopRecording();
    await waitFor(client, (s) => s.frame !== null && !s.frame.recording);

    client.save();
    expect(client.startRecording()).toBe(false); // gated until the verdict
    const s = await waitFor(client,
      (st) => st.savedPath !== null && st.verdicts.length === 2);
    expect(s.verdicts.map((v) => v.mode)).toEqual(["safety", "training"]);
    expect(s.verdicts.every((v) => v.accept)).toBe(true);
    expect(statSync(join(s.savedPath!, "signals.csv")).isFile()).toBe(true);
    expect(client.startRecording()).toBe(true); // verdict shown, gate open
    client.stopRecording();
    client.close();
  });

  it("replaying the control stream reproduces the episode byte for byte",
     async () => {
    const schedule = (k: number): [number, number, number] => [
      k % 2 === 0 ? 0.003 : 0.001,
      k % 3 === 0 ? 0.0005 : -0.0005,
      k < 4 ? 0.01 : -0.01,
    ];

    async function drive(): Promise<string> {
      const ws = await connect();
      const outbox = new Outbox();
      let state = initialState();
      const seen = new Set<number>();
      const saved = new Promise<string>((resolve, reject) => {
        const timer = setTimeout(
          () => reject(new Error("driven session never saved")), 15_000);
        ws.addEventListener("message", (ev: any) => {
          const msg: ServerMessage = parseServerMessage(String(ev.data));
          state = applyServer(state, msg);
          if (msg.type === "state" && msg.recording && !seen.has(msg.tick)) {
            seen.add(msg.tick);
            if (msg.tick < 8) {
              const [dx, dz, dth] = schedule(msg.tick);
              ws.send(outbox.control(dx, dz, dth));
            } else if (msg.tick === 8) {
              ws.send(outbox.record("stop"));
              ws.send(outbox.record("save"));
            }
          }
          if (state.savedPath !== null && state.verdicts.length === 2) {
            clearTimeout(timer);
            resolve(state.savedPath);
          }
        });
      });
      ws.send(outbox.record("start", 3));
      const path = await saved;
      ws.close();
      return path;
    }

    const a = await drive();
    const b = await drive();
    expect(a).not.toBe(b); // two sessions, two files

    const listing = (dir: string): string[] => {
      const out: string[] = [];
      const walk = (rel: string) => {
        for (const name of readdirSync(join(dir, rel)).sort()) {
          const relPath = rel === "" ? name : `${rel}/${name}`;
          if (statSync(join(dir, relPath)).isDirectory()) walk(relPath);
          else out.push(relPath);
        }
      };
      walk("");
      return out;
    };
    expect(listing(a)).toEqual(listing(b));
    expect(listing(a)).toContain("signals.csv");
    expect(listing(a)).toContain("meta.json");
    for (const rel of listing(a)) {
      expect(readFileSync(join(a, rel)).equals(readFileSync(join(b, rel))),
             `${rel} differs`).toBe(true);
    }
  }, 60_000);
});
