// Force bar model. Color bands come from the filter config the bridge
// serves in its hello message; no newton value is hardcoded here.

import type { FilterLimits, Forces } from "./protocol.js";

export const CHANNELS = ["fx", "fy", "fz", "f1", "f2"] as const;
export type Channel = (typeof CHANNELS)[number];

export type Zone = "normal" | "warning" | "danger";

export interface ForceBands {
  warn: number;   // keep_fraction * peak_limit
  danger: number; // peak_limit
}

export function bandsFrom(filter: FilterLimits): ForceBands {
  return {
    warn: filter.keep_fraction * filter.peak_limit,
    danger: filter.peak_limit,
  };
}

export function classify(force: number, bands: ForceBands): Zone {
  const f = Math.abs(force);
  if (f >= bands.danger) return "danger";
  if (f >= bands.warn) return "warning";
  return "normal";
}

/** Bar length as a fraction of the danger level, capped at 1. */
export function barFraction(force: number, bands: ForceBands): number {
  return Math.min(Math.abs(force) / bands.danger, 1.0);
}

export interface BarView {
  channel: Channel;
  newtons: number;
  fraction: number;
  zone: Zone;
}

export function barViews(forces: Forces, bands: ForceBands): BarView[] {
  return CHANNELS.map((ch) => {
    const f = Math.abs(forces[ch]);
    return { channel: ch, newtons: f, fraction: barFraction(f, bands), zone: classify(f, bands) };
  });
}
