/** Belief bar-chart data handling; values come verbatim from the service. */

import type { BeliefDump } from "./api.js";

export interface BeliefBar {
  hypothesis: string;
  weight: number;
}

/** Stable, sorted rows for the bar chart (hypothesis id order). */
export function beliefBars(dump: BeliefDump): BeliefBar[] {
  return Object.keys(dump.weights)
    .sort()
    .map((k) => ({ hypothesis: k, weight: dump.weights[k] }));
}

/** Exact equality against a reference dump (the server's values are used
 * unmodified, so any mismatch is a bug, not float noise). */
export function beliefEquals(a: BeliefDump, b: BeliefDump): boolean {
  const ka = Object.keys(a.weights).sort();
  const kb = Object.keys(b.weights).sort();
  if (ka.length !== kb.length) return false;
  return ka.every((k, i) => kb[i] === k && a.weights[k] === b.weights[k]);
}

export function formatWeight(w: number): string {
  return `${(100 * w).toFixed(1)}%`;
}
