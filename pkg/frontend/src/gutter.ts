/** Pure presentation maps: span state to gutter mark, statuses to the
 * error panel's rows. */

import type { SpanInfo, SpanState } from "./protocol.js";
import type { SpanStatus } from "./model.js";

export type GutterMark = "grey" | "amber" | "green" | "red" | "struck-grey";

const MARKS: Record<SpanState, GutterMark> = {
  pending: "grey",
  running: "amber",
  finished: "green",
  failed: "red",
  cancelled: "struck-grey",
};

export function gutterMark(state: SpanState): GutterMark {
  return MARKS[state];
}

export interface PanelRow {
  span: number;
  /** 1-based first line of the span inside the rebuilt document */
  line: number;
  severity: string;
  text: string;
  offset: number;
}

/** Rows for every message on every span, in document order, with the line
 * each span starts on so the panel can navigate. */
export function panelRows(
  spans: SpanInfo[],
  statuses: Map<number, SpanStatus>,
): PanelRow[] {
  const rows: PanelRow[] = [];
  let line = 1;
  for (const span of spans) {
    const status = statuses.get(span.id);
    for (const m of status?.messages ?? []) {
      rows.push({
        span: span.id,
        line,
        severity: m.severity,
        text: m.text,
        offset: m.offset,
      });
    }
    line += span.text.split("\n").length;
  }
  return rows;
}
