/**
 * Per-tab comparison state: completed plan runs pinned side by side so a
 * rerun never overwrites what the analyst was looking at.
 */

import { Plan } from "./schemas.js";
import { ScenarioDraft } from "./scenario.js";

export interface ComparisonSlot {
  runId: string;
  draft: ScenarioDraft;
  plan: Plan;
}

export const MAX_SLOTS = 4;

/** Append a completed run, evicting the oldest slot beyond the cap. */
export function addSlot(
  slots: readonly ComparisonSlot[],
  slot: ComparisonSlot,
): ComparisonSlot[] {
  const next = [...slots, slot];
  return next.length > MAX_SLOTS ? next.slice(next.length - MAX_SLOTS) : next;
}

export function removeSlot(
  slots: readonly ComparisonSlot[],
  runId: string,
): ComparisonSlot[] {
  return slots.filter((s) => s.runId !== runId);
}
