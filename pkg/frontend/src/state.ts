/** View model: a pure function of the last committed server snapshot
 * plus in-flight request status. Nothing optimistic lives here; a
 * rejected label leaves the view exactly where the server says it is. */

import type { PendingQuery, SessionSnapshot } from "./types.js";

export interface SessionView {
  snapshot: SessionSnapshot | null;
  labelInFlight: boolean;
  /** blocking error banner, e.g. service unreachable */
  banner: string | null;
  /** non-blocking notification, e.g. a conflict forced a re-sync */
  notice: string | null;
}

export const initialView: SessionView = {
  snapshot: null,
  labelInFlight: false,
  banner: null,
  notice: null,
};

export function withSnapshot(view: SessionView, snapshot: SessionSnapshot): SessionView {
  return { ...view, snapshot, banner: null };
}

export function withBanner(view: SessionView, banner: string): SessionView {
  return { ...view, banner };
}

export function withNotice(view: SessionView, notice: string | null): SessionView {
  return { ...view, notice };
}

export function withInFlight(view: SessionView, labelInFlight: boolean): SessionView {
  return { ...view, labelInFlight };
}

export function canLabel(view: SessionView): boolean {
  return (
    !view.labelInFlight &&
    view.snapshot !== null &&
    view.snapshot.status === "active" &&
    view.snapshot.pending !== null
  );
}

export interface FeatureRow {
  name: string;
  value: number;
  deviation: number;
}

/** Feature table rows sorted by absolute deviation from the dataset
 * median, most unusual first. Presentation aid only. */
export function featureRows(
  pending: PendingQuery,
  medians: Record<string, number>,
): FeatureRow[] {
  const rows = Object.entries(pending.features).map(([name, value]) => ({
    name,
    value,
    deviation: Math.abs(value - (medians[name] ?? 0)),
  }));
  rows.sort((a, b) => b.deviation - a.deviation || a.name.localeCompare(b.name));
  return rows;
}
