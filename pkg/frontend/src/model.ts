// View-model logic kept free of the DOM so it is directly testable:
// staleness, failure backoff, response coalescing, overview assembly.

import type { StationSummary, TelemetryRecord } from "./api.js";

export interface StationView {
  id: string;
  lastReceivedAt: number;
  pendingCommands: number;
  latest: TelemetryRecord | null;
  stale: boolean;
}

export const STALE_FACTOR = 3;

export function isStale(lastReceivedAt: number, nowS: number, pushPeriodS: number): boolean {
  return nowS - lastReceivedAt > STALE_FACTOR * pushPeriodS;
}

export function buildOverview(
  summaries: StationSummary[],
  latests: Map<string, TelemetryRecord>,
  nowS: number,
  pushPeriodS: number,
): StationView[] {
  return summaries.map((summary) => ({
    id: summary.station,
    lastReceivedAt: summary.last_received_at,
    pendingCommands: summary.pending_commands,
    latest: latests.get(summary.station) ?? null,
    stale: isStale(summary.last_received_at, nowS, pushPeriodS),
  }));
}

// Consecutive poll failures back off exponentially: 2, 4, 8, 16, 30, 30, ...
export function backoffDelayS(consecutiveFailures: number, baseS = 2, capS = 30): number {
  if (consecutiveFailures <= 0) {
    return baseS;
  }
  return Math.min(capS, baseS * 2 ** (consecutiveFailures - 1));
}

// Overlapping fetches for one view are coalesced: a response is applied
// only if no newer request has already been applied.
export class LatestWins {
  private nextToken = 1;
  private applied = 0;

  issue(): number {
    return this.nextToken++;
  }

  tryApply(token: number): boolean {
    if (token < this.applied) {
      return false;
    }
    this.applied = token;
    return true;
  }
}
