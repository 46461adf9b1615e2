// Browser entry point. Configuration happens through URL parameters:
//   ?server=ws://host:port  (default ws://127.0.0.1:8765)
//   &sensitivity=0.5        (fraction of the served per-step limits)

import { ConsoleClient } from "./client.js";
import { mountConsole, paint } from "./render.js";

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? "ws://127.0.0.1:8765";
const sensitivity = Number(params.get("sensitivity") ?? "1") || 1;

const client = new ConsoleClient(new WebSocket(server), { sensitivity });

const refs = mountConsole(document.getElementById("console")!, {
  start: () => client.startRecording(),
  stop: () => client.stopRecording(),
  save: () => client.save(),
  discard: () => client.discard(),
  reset: () => client.reset(),
  reconnect: () => window.location.reload(),
});

client.onChange((s) => paint(refs, s));

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  if (client.tracker.press(ev.code)) {
    ev.preventDefault();
    client.pump(); // do not sit on a press until the next beat
  }
});
window.addEventListener("keyup", (ev) => client.tracker.release(ev.code));
window.addEventListener("blur", () => client.tracker.releaseAll());
