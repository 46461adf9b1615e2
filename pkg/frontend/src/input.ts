// Keyboard to control-increment mapping. Increments are expressed as a
// fraction of the per-step limits the bridge serves, scaled by a user
// sensitivity setting, so the client adapts to whatever the sim allows.

import type { StepLimits } from "./protocol.js";

export type Direction = [number, number, number]; // unit dx, dz, dtheta

export interface Bindings {
  [code: string]: Direction;
}

export const defaultBindings: Bindings = {
  ArrowRight: [1, 0, 0],
  ArrowLeft: [-1, 0, 0],
  ArrowUp: [0, 1, 0],
  ArrowDown: [0, -1, 0],
  KeyA: [0, 0, 1],
  KeyD: [0, 0, -1],
};

export class InputTracker {
  private held = new Set<string>();

  constructor(private bindings: Bindings = defaultBindings) {}

  /** Returns true when the key is bound (callers preventDefault on it). */
  press(code: string): boolean {
    if (!(code in this.bindings)) return false;
    this.held.add(code);
    return true;
  }

  release(code: string): void {
    this.held.delete(code);
  }

  releaseAll(): void {
    this.held.clear();
  }

  get active(): boolean {
    return this.held.size > 0;
  }

  /** Current increment; all zeros when nothing is held (explicit idle). */
  increments(limits: StepLimits, sensitivity = 1.0): Direction {
    let dx = 0;
    let dz = 0;
    let dth = 0;
    for (const code of this.held) {
      const [x, z, th] = this.bindings[code];
      dx += x;
      dz += z;
      dth += th;
    }
    const unit = (v: number) => Math.max(-1, Math.min(1, v));
    return [
      unit(dx) * sensitivity * limits.max_step_xy,
      unit(dz) * sensitivity * limits.max_step_xy,
      unit(dth) * sensitivity * limits.max_step_theta,
    ];
  }
}
