import { describe, expect, it } from "vitest";

import { gutterMark, panelRows } from "../src/gutter.ts";
import type { SpanStatus } from "../src/model.ts";

describe("gutter marks", () => {
  it("maps every checking state to a distinct mark", () => {
    expect(gutterMark("pending")).toBe("grey");
    expect(gutterMark("running")).toBe("amber");
    expect(gutterMark("finished")).toBe("green");
    expect(gutterMark("failed")).toBe("red");
    expect(gutterMark("cancelled")).toBe("struck-grey");
  });
});

describe("panel rows", () => {
  it("walks span heights to 1-based document lines", () => {
    const spans = [
      { id: 3, text: "(* two\nlines *)\nlemma a : p -> p." },
      { id: 4, text: "proof." },
      { id: 7, text: "qed." },
    ];
    const statuses = new Map<number, SpanStatus>([
      [3, { state: "finished", messages: [] }],
      [
        4,
        {
          state: "failed",
          messages: [
            { severity: "error", text: "no goal", offset: 0 },
            { severity: "note", text: "body skipped", offset: 3 },
          ],
        },
      ],
      [7, { state: "cancelled", messages: [{ severity: "error", text: "open goals", offset: 0 }] }],
    ]);
    expect(panelRows(spans, statuses)).toEqual([
      { span: 4, line: 4, severity: "error", text: "no goal", offset: 0 },
      { span: 4, line: 4, severity: "note", text: "body skipped", offset: 3 },
      { span: 7, line: 5, severity: "error", text: "open goals", offset: 0 },
    ]);
  });

  it("is empty when nothing has messages", () => {
    const spans = [{ id: 1, text: "def a := p." }];
    const statuses = new Map<number, SpanStatus>([
      [1, { state: "finished", messages: [] }],
    ]);
    expect(panelRows(spans, statuses)).toEqual([]);
  });
});
