// DOM panels. Everything here is dumb painting over ConsoleState; the
// logic lives in state.ts/bars.ts and is tested there.

import { barViews, bandsFrom } from "./bars.js";
import type { ConsoleState } from "./state.js";
import { canStartRecording, isRecording } from "./state.js";

export interface Actions {
  start(): void;
  stop(): void;
  save(): void;
  discard(): void;
  reset(): void;
  reconnect(): void;
}

interface Refs {
  status: HTMLElement;
  cam: HTMLImageElement;
  side: HTMLImageElement;
  barsBox: HTMLElement;
  barRows: { fill: HTMLElement; label: HTMLElement }[];
  clock: HTMLElement;
  outcome: HTMLElement;
  verdicts: HTMLElement;
  errors: HTMLElement;
  buttons: Record<string, HTMLButtonElement>;
  reconnect: HTMLButtonElement;
  panels: HTMLElement;
}

const ZONE_COLOR = { normal: "#3fa34d", warning: "#e0a000", danger: "#d23c3c" };

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, parent: HTMLElement, cls?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  parent.appendChild(node);
  return node;
}

export function mountConsole(root: HTMLElement, actions: Actions): Refs {
  root.innerHTML = "";
  const status = el("div", root, "status");
  const panels = el("div", root, "panels");
  const camBox = el("figure", panels, "panel");
  const cam = el("img", camBox);
  el("figcaption", camBox).textContent = "camera 1";
  const sideBox = el("figure", panels, "panel");
  const side = el("img", sideBox);
  el("figcaption", sideBox).textContent = "side view";

  const barsBox = el("div", root, "bars");
  const barRows = ["fx", "fy", "fz", "f1", "f2"].map((name) => {
    const row = el("div", barsBox, "bar-row");
    el("span", row, "bar-name").textContent = name;
    const track = el("div", row, "bar-track");
    const fill = el("div", track, "bar-fill");
    const label = el("span", row, "bar-label");
    return { fill, label };
  });

  const clock = el("div", root, "clock");
  const outcome = el("div", root, "outcome");

  const controls = el("div", root, "controls");
  const buttons: Record<string, HTMLButtonElement> = {};
  for (const [name, fn] of Object.entries({
    start: actions.start, stop: actions.stop, save: actions.save,
    discard: actions.discard, reset: actions.reset,
  })) {
    const b = el("button", controls);
    b.textContent = name;
    b.addEventListener("click", fn);
    buttons[name] = b;
  }
  const reconnect = el("button", controls, "reconnect");
  reconnect.textContent = "reconnect";
  reconnect.hidden = true;
  reconnect.addEventListener("click", actions.reconnect);

  const verdicts = el("div", root, "verdicts");
  const errors = el("div", root, "errors");
  return { status, cam, side, barsBox, barRows, clock, outcome, verdicts,
           errors, buttons, reconnect, panels };
}

export function paint(r: Refs, s: ConsoleState): void {
  const closed = s.connection === "closed";
  r.status.textContent = closed ? "disconnected"
    : s.hello === null ? "connecting..."
    : `session ${s.hello.session} (seed ${s.hello.seed})`
      + (isRecording(s) ? " - RECORDING" : "");
  r.panels.style.opacity = closed ? "0.35" : "1";
  r.reconnect.hidden = !closed;

  if (s.frame !== null) {
    r.cam.src = `data:image/png;base64,${s.frame.frame}`;
    r.side.src = `data:image/png;base64,${s.frame.side}`;
    r.outcome.textContent = s.frame.outcome.status === "in_progress"
      ? "" : `${s.frame.outcome.status}: ${s.frame.outcome.reason}`;
  }

  if (s.hello !== null && s.frame !== null) {
    const bands = bandsFrom(s.hello.filter);
    const views = barViews(s.frame.forces, bands);
    views.forEach((v, i) => {
      const row = r.barRows[i];
      row.fill.style.width = `${(v.fraction * 100).toFixed(1)}%`;
      row.fill.style.background = ZONE_COLOR[v.zone];
      row.label.textContent = `${v.newtons.toFixed(2)} N`;
    });
    r.clock.textContent =
      `t = ${s.frame.t.toFixed(2)} s / ${s.hello.time_limit.toFixed(0)} s`;
  }

  r.buttons.start.disabled = !canStartRecording(s);
  r.buttons.stop.disabled = !isRecording(s);

  r.verdicts.innerHTML = "";
  if (s.awaitingVerdict) r.verdicts.textContent = "saving...";
  for (const v of s.verdicts) {
    const line = document.createElement("div");
    line.className = v.accept ? "verdict ok" : "verdict bad";
    line.textContent = v.accept
      ? `${v.mode}: accepted`
      : `${v.mode}: rejected (${v.reasons.join("; ")})`;
    r.verdicts.appendChild(line);
  }
  if (s.savedPath !== null) {
    const line = document.createElement("div");
    line.textContent = `saved to ${s.savedPath}`;
    r.verdicts.appendChild(line);
  }

  r.errors.textContent = s.errors.length === 0 ? "" : s.errors[s.errors.length - 1];
}
